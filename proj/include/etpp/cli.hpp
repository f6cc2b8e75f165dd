// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "etpp/model/config.hpp"
#include "etpp/synth.hpp"
#include "json.hpp"

namespace etpp::cli {

/// Everything one command needs. Built from defaults, then the --config
/// file, then command-line flags, in increasing precedence.
struct RunConfig {
    std::string command;
    std::filesystem::path data_dir;
    std::filesystem::path out_dir = ".";
    std::filesystem::path checkpoint;
    std::filesystem::path query;
    std::optional<std::uint64_t> seed;
    std::size_t reps = 10;
    std::size_t splits = 3;
    std::string methods = "etpp,etpp1,etpp2,etpp3,game_median,section_median,linear";
    std::vector<std::size_t> bins;
    std::size_t workers = 0;  ///< 0 = hardware concurrency
    bool verbose = false;
    model::ModelConfig model;
    synth::SynthConfig synth;
};

nlohmann::json to_json(const RunConfig& config);
/// Overrides fields of `base` with those present in `j`; unknown keys rejected.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Parses argv and runs one command. Errors are printed to `err` as a single
/// `error[kind]: message` line. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace etpp::cli
