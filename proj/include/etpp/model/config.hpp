// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "etpp/numerics/ops.hpp"

namespace etpp::model {

enum class Variant {
    kFull,
    kNoTemporal,    ///< etpp1: per-bin dense layer instead of the GRU
    kNoSpatial,     ///< etpp2: imputed grid input fed directly as D
    kSeatLossOnly,  ///< etpp3: alpha = 0, beta = 1
};

std::string_view to_string(Variant v);
/// Accepts "etpp", "etpp1", "etpp2", "etpp3".
Variant parse_variant(std::string_view text);

enum class ChannelMerge { kMean, kSum };

std::string_view to_string(ChannelMerge c);
ChannelMerge parse_channel_merge(std::string_view text);

struct ModelConfig {
    std::size_t bins = 20;
    std::size_t grid_rows = 4;
    std::size_t grid_cols = 4;
    std::size_t hidden = 30;
    std::size_t refine_width = 7;
    double alpha = 0.3;
    double beta = 0.7;
    numerics::GruActivation gru_activation = numerics::GruActivation::kStandard;
    ChannelMerge channel_merge = ChannelMerge::kMean;
    Variant variant = Variant::kFull;

    double learning_rate = 1e-2;
    std::size_t epochs = 200;
    /// Epochs without validation improvement before stopping; 0 disables.
    std::size_t patience = 20;
    /// Events per Adam step; 0 means the whole training split.
    std::size_t batch_size = 0;
    std::uint64_t seed = 1;
    double coverage = 0.95;
    /// Draw a random cutoff bin per event and epoch; bins at or after it are
    /// fed the prior surface instead of observed medians.
    bool cutoff_augmentation = true;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Throws kInvalidArgument describing the first violated constraint.
void validate(const ModelConfig& config);

/// Config for a variant; etpp3 also forces alpha = 0, beta = 1.
ModelConfig with_variant(ModelConfig config, Variant variant);

}  // namespace etpp::model
