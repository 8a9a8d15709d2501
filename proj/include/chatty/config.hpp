#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chatty/data.hpp"
#include "chatty/train.hpp"

namespace chatty {

// Declarative dataset description. kind selects the generator.
struct DatasetConfig {
    std::string kind = "moons";  // moons | blobs
    Real rotation_deg = 30.0;
    Real noise = 0.1;
    Index n = 600;  // moons: samples per domain
    Index classes = 3;
    Index n_per_class = 200;
    Index dim = 2;
    std::vector<Real> translation;  // blobs target shift; empty = zeros
    std::uint64_t seed = 7;

    DomainPair generate() const;
    bool operator==(const DatasetConfig&) const = default;
};

// One experiment: dataset + training hyperparameters + output directory.
// Every field has a default, so an empty config file is runnable.
struct ExperimentConfig {
    DatasetConfig dataset;
    TrainConfig train;
    std::string preset = "none";  // none | office31 | officehome
    std::string out_dir = "run_out";
};

// Strict flat key=value parser ('#' starts a comment). Unknown keys,
// duplicate keys, and malformed values throw ParamError naming the line and
// field. `origin` labels the source in diagnostics (e.g. the file path).
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

// parse_config_text over a file's contents. Unreadable file -> ParamError.
ExperimentConfig load_config(const std::string& path);

// Echoes every key with its resolved value (defaults materialized) in a form
// parse_config_text accepts, for reproducibility records.
std::string resolved_config_text(const ExperimentConfig& config);

}  // namespace chatty
