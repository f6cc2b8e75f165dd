// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/model/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "etpp/error.hpp"
#include "etpp/io.hpp"

namespace etpp::model {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "ETPPCKPT";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
   public:
    void bytes(std::string_view s) { out_.append(s); }
    template <typename T>
    void pod(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void array(const std::string& name, const Array& a) {
        pod<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        bytes(name);
        pod<std::uint32_t>(static_cast<std::uint32_t>(a.rank()));
        for (const std::size_t d : a.shape()) pod<std::uint64_t>(d);
        for (const double x : a.data()) pod<double>(x);
    }
    std::string& str() { return out_; }

   private:
    std::string out_;
};

class Reader {
   public:
    Reader(std::string_view data, std::string_view source) : data_(data), source_(source) {}
    std::string_view bytes(std::size_t n) {
        if (n > data_.size() - pos_) {
            fail(ErrorKind::kParse, std::string(source_) + ": truncated checkpoint (need " + std::to_string(n) +
                                        " bytes at offset " + std::to_string(pos_) + ")");
        }
        const std::string_view s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    template <typename T>
    T pod() {
        T v;
        std::memcpy(&v, bytes(sizeof(T)).data(), sizeof(T));
        return v;
    }
    std::pair<std::string, Array> array() {
        const auto name_len = pod<std::uint32_t>();
        std::string name(bytes(name_len));
        const auto rank = pod<std::uint32_t>();
        if (rank > 8) fail(ErrorKind::kParse, std::string(source_) + ": implausible rank for array '" + name + "'");
        numerics::Shape shape;
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape.push_back(static_cast<std::size_t>(pod<std::uint64_t>()));
            count *= shape.back();
        }
        if (count > (data_.size() - pos_) / sizeof(double)) {
            fail(ErrorKind::kParse, std::string(source_) + ": truncated checkpoint in array '" + name + "'");
        }
        std::vector<double> values(count);
        for (double& x : values) x = pod<double>();
        return {std::move(name), Array(std::move(shape), std::move(values))};
    }
    [[nodiscard]] std::size_t pos() const noexcept { return pos_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }

   private:
    std::string_view data_;
    std::string_view source_;
    std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double number(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json to_json(const domain::Standardizer& s) { return {{"mean", s.mean}, {"stdev", s.stdev}, {"fitted_on", s.fitted_on}}; }

domain::Standardizer standardizer_from(const json& j) {
    return {j.at("mean").get<double>(), j.at("stdev").get<double>(), j.at("fitted_on").get<std::uint64_t>()};
}

json header_json(const Model& model) {
    const Preprocessing& p = model.prep;
    json seats = json::array();
    for (const domain::Seat& s : p.seat_map.seats()) seats.push_back({s.row, s.col, s.section});
    json encoder = json::array();
    for (const auto& c : p.encoder.columns()) {
        encoder.push_back({{"name", c.name}, {"categorical", c.categorical}, {"levels", c.levels}});
    }
    json scaler = json::array();
    for (const auto& s : p.feature_scaler.columns) scaler.push_back(to_json(s));
    json history = json::array();
    for (const EpochRecord& r : model.summary.history) {
        history.push_back({r.epoch, number(r.train_loss), number(r.val_loss)});
    }
    return {
        {"config", config_to_json(model.config)},
        {"fitted_on", p.fitted_on},
        {"seat_map", seats},
        {"binning", {{"bins", p.binning.bins}, {"upper", p.binning.upper}, {"fitted_on", p.binning.fitted_on}}},
        {"price", to_json(p.price)},
        {"encoder", encoder},
        {"feature_scaler", scaler},
        {"seat_scaling", {{"row", to_json(p.seat_scaling.row)}, {"col", to_json(p.seat_scaling.col)},
                          {"dte", to_json(p.seat_scaling.dte)}}},
        {"prior_fitted_on", p.prior.fitted_on},
        {"summary",
         {{"history", history},
          {"best_epoch", model.summary.best_epoch},
          {"best_val_loss", number(model.summary.best_val_loss)},
          {"stopped_early", model.summary.stopped_early},
          {"halted", model.summary.halted},
          {"halt_reason", model.summary.halt_reason}}},
    };
}

}  // namespace

json config_to_json(const ModelConfig& c) {
    return {
        {"bins", c.bins},
        {"grid_rows", c.grid_rows},
        {"grid_cols", c.grid_cols},
        {"hidden", c.hidden},
        {"refine_width", c.refine_width},
        {"alpha", c.alpha},
        {"beta", c.beta},
        {"gru_activation", std::string(numerics::to_string(c.gru_activation))},
        {"channel_merge", std::string(to_string(c.channel_merge))},
        {"variant", std::string(to_string(c.variant))},
        {"learning_rate", c.learning_rate},
        {"epochs", c.epochs},
        {"patience", c.patience},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"coverage", c.coverage},
        {"cutoff_augmentation", c.cutoff_augmentation},
    };
}

ModelConfig config_from_json(const json& j, ModelConfig c) {
    if (!j.is_object()) fail(ErrorKind::kParse, "model config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "bins") c.bins = value.get<std::size_t>();
            else if (key == "grid_rows") c.grid_rows = value.get<std::size_t>();
            else if (key == "grid_cols") c.grid_cols = value.get<std::size_t>();
            else if (key == "hidden") c.hidden = value.get<std::size_t>();
            else if (key == "refine_width") c.refine_width = value.get<std::size_t>();
            else if (key == "alpha") c.alpha = value.get<double>();
            else if (key == "beta") c.beta = value.get<double>();
            else if (key == "gru_activation") c.gru_activation = numerics::parse_gru_activation(value.get<std::string>());
            else if (key == "channel_merge") c.channel_merge = parse_channel_merge(value.get<std::string>());
            else if (key == "variant") c.variant = parse_variant(value.get<std::string>());
            else if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "epochs") c.epochs = value.get<std::size_t>();
            else if (key == "patience") c.patience = value.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "coverage") c.coverage = value.get<double>();
            else if (key == "cutoff_augmentation") c.cutoff_augmentation = value.get<bool>();
            else fail(ErrorKind::kParse, "unknown model config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::kParse, std::string("model config: ") + e.what());
    }
    return c;
}

std::string encode_checkpoint(const Model& model) {
    Writer w;
    w.bytes(kMagic);
    w.pod<std::uint32_t>(kCheckpointVersion);
    const std::string header = header_json(model).dump();
    w.pod<std::uint64_t>(header.size());
    w.bytes(header);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(model.params.size() + 1));
    for (std::size_t i = 0; i < model.params.size(); ++i) w.array("param/" + model.params.name(i), model.params.at(i));
    w.array("prior", model.prep.prior.values);
    const std::uint64_t sum = fnv1a(w.str());
    w.pod<std::uint64_t>(sum);
    return std::move(w.str());
}

Model decode_checkpoint(std::string_view bytes, std::string_view source) {
    const std::string src(source);
    Reader r(bytes, source);
    if (r.bytes(kMagic.size()) != kMagic) fail(ErrorKind::kParse, src + ": not an ETPP checkpoint (bad magic)");
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion) {
        fail(ErrorKind::kVersion, src + ": checkpoint version " + std::to_string(version) +
                                      " is not supported (this build reads version " +
                                      std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_len = r.pod<std::uint64_t>();
    if (header_len > r.remaining()) fail(ErrorKind::kParse, src + ": truncated checkpoint header");
    const std::string_view header_text = r.bytes(static_cast<std::size_t>(header_len));
    const auto count = r.pod<std::uint32_t>();
    std::vector<std::pair<std::string, Array>> arrays;
    for (std::uint32_t i = 0; i < count; ++i) arrays.push_back(r.array());
    const std::size_t body = r.pos();
    const auto stored = r.pod<std::uint64_t>();
    if (r.remaining() != 0) fail(ErrorKind::kParse, src + ": trailing bytes after checkpoint");
    if (stored != fnv1a(bytes.substr(0, body))) fail(ErrorKind::kParse, src + ": checkpoint checksum mismatch");

    Model model;
    try {
        const json h = json::parse(header_text);
        model.config = config_from_json(h.at("config"));
        validate(model.config);
        Preprocessing& p = model.prep;
        p.fitted_on = h.at("fitted_on").get<std::uint64_t>();
        std::vector<domain::Seat> seats;
        for (const json& s : h.at("seat_map")) seats.push_back({s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<std::string>()});
        p.seat_map = domain::SeatMap(std::move(seats));
        p.layout = coarsen::build_grid_layout(p.seat_map, model.config.grid_rows, model.config.grid_cols);
        const json& b = h.at("binning");
        p.binning = {b.at("bins").get<std::size_t>(), b.at("upper").get<double>(), b.at("fitted_on").get<std::uint64_t>()};
        p.price = standardizer_from(h.at("price"));
        std::vector<domain::FeatureEncoder::Column> columns;
        for (const json& c : h.at("encoder")) {
            columns.push_back({c.at("name").get<std::string>(), c.at("categorical").get<bool>(),
                               c.at("levels").get<std::vector<std::string>>()});
        }
        p.encoder = domain::FeatureEncoder(std::move(columns));
        for (const json& s : h.at("feature_scaler")) p.feature_scaler.columns.push_back(standardizer_from(s));
        const json& ss = h.at("seat_scaling");
        p.seat_scaling = {standardizer_from(ss.at("row")), standardizer_from(ss.at("col")), standardizer_from(ss.at("dte"))};
        p.prior.fitted_on = h.at("prior_fitted_on").get<std::uint64_t>();
        const json& s = h.at("summary");
        for (const json& row : s.at("history")) {
            model.summary.history.push_back({row.at(0).get<std::size_t>(), number(row.at(1)), number(row.at(2))});
        }
        model.summary.best_epoch = s.at("best_epoch").get<std::size_t>();
        model.summary.best_val_loss = number(s.at("best_val_loss"));
        model.summary.stopped_early = s.at("stopped_early").get<bool>();
        model.summary.halted = s.at("halted").get<bool>();
        model.summary.halt_reason = s.at("halt_reason").get<std::string>();
    } catch (const json::exception& e) {
        fail(ErrorKind::kParse, src + ": malformed checkpoint header: " + e.what());
    }

    bool have_prior = false;
    for (auto& [name, array] : arrays) {
        if (name == "prior") {
            model.prep.prior.values = std::move(array);
            have_prior = true;
        } else if (name.starts_with("param/")) {
            model.params.add(name.substr(6), std::move(array));
        } else {
            fail(ErrorKind::kParse, src + ": unexpected array '" + name + "'");
        }
    }
    if (!have_prior) fail(ErrorKind::kParse, src + ": checkpoint has no prior surface");

    // Shapes must match what the config and preprocessing imply.
    const ParamSet expected = init_params(model.config, model.prep.dims(), 0);
    if (expected.size() != model.params.size()) fail(ErrorKind::kShape, src + ": parameter count mismatch");
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (expected.name(i) != model.params.name(i) || expected.at(i).shape() != model.params.at(i).shape()) {
            fail(ErrorKind::kShape, src + ": parameter '" + model.params.name(i) + "' does not match the config");
        }
    }
    const numerics::Shape prior_shape{model.prep.layout.m(), model.config.bins};
    if (model.prep.prior.values.shape() != prior_shape) fail(ErrorKind::kShape, src + ": prior surface shape mismatch");
    return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
    io::write_text_file(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_text_file(path), path.string());
}

}  // namespace etpp::model
