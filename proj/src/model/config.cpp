// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/model/config.hpp"

#include <cmath>
#include <string>

#include "etpp/error.hpp"

namespace etpp::model {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::kFull:
            return "etpp";
        case Variant::kNoTemporal:
            return "etpp1";
        case Variant::kNoSpatial:
            return "etpp2";
        case Variant::kSeatLossOnly:
            return "etpp3";
    }
    return "?";
}

Variant parse_variant(std::string_view text) {
    if (text == "etpp") return Variant::kFull;
    if (text == "etpp1") return Variant::kNoTemporal;
    if (text == "etpp2") return Variant::kNoSpatial;
    if (text == "etpp3") return Variant::kSeatLossOnly;
    fail(ErrorKind::kInvalidArgument, "unknown variant '" + std::string(text) + "' (expected etpp, etpp1, etpp2, etpp3)");
}

std::string_view to_string(ChannelMerge c) { return c == ChannelMerge::kMean ? "mean" : "sum"; }

ChannelMerge parse_channel_merge(std::string_view text) {
    if (text == "mean") return ChannelMerge::kMean;
    if (text == "sum") return ChannelMerge::kSum;
    fail(ErrorKind::kInvalidArgument, "unknown channel merge '" + std::string(text) + "' (expected mean or sum)");
}

void validate(const ModelConfig& c) {
    const auto reject = [](const std::string& msg) { fail(ErrorKind::kInvalidArgument, "model config: " + msg); };
    if (c.bins == 0) reject("bins must be >= 1");
    if (c.grid_rows == 0 || c.grid_cols == 0) reject("grid dimensions must be >= 1");
    if (c.hidden == 0) reject("hidden size must be >= 1");
    if (c.refine_width == 0) reject("refine width must be >= 1");
    if (!(c.alpha >= 0.0) || !(c.beta >= 0.0)) reject("alpha and beta must be >= 0");
    if (!(c.alpha + c.beta > 0.0)) reject("alpha + beta must be > 0");
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) reject("learning rate must be positive");
    if (!(c.coverage > 0.0 && c.coverage <= 1.0)) reject("coverage must lie in (0, 1]");
}

ModelConfig with_variant(ModelConfig config, Variant variant) {
    config.variant = variant;
    if (variant == Variant::kSeatLossOnly) {
        config.alpha = 0.0;
        config.beta = 1.0;
    }
    return config;
}

}  // namespace etpp::model
