// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "etpp/model/train.hpp"
#include "json.hpp"

namespace etpp::model {

/// Binary checkpoint layout (all integers and doubles little-endian):
///
///   "ETPPCKPT"                      8 bytes
///   version                         u32
///   header length H                 u64
///   header                          H bytes of UTF-8 JSON: config, seat map,
///                                   binning, standardizers, encoder, feature
///                                   scaler, training summary
///   array count A                   u32
///   A x { name length u32, name bytes, rank u32, dims u64 x rank,
///         values f64 x prod(dims) } parameters as "param/<name>", then
///                                   "prior" (the m x L prior surface)
///   checksum                        u64 FNV-1a of every preceding byte
///
/// The grid layout is rebuilt from the seat map and grid dimensions.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Model& model);
/// `source` names the input in diagnostics.
Model decode_checkpoint(std::string_view bytes, std::string_view source = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

nlohmann::json config_to_json(const ModelConfig& config);
/// Fields present in `j` override `base`; unknown keys are rejected.
ModelConfig config_from_json(const nlohmann::json& j, ModelConfig base = {});

}  // namespace etpp::model
