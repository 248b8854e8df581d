#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dsmap/data.hpp"
#include "dsmap/evaluate.hpp"
#include "dsmap/model.hpp"
#include "dsmap/train.hpp"

namespace dsmap {

/// Every tunable the tools expose, grouped the same way the config file
/// namespaces its keys: model.*, train.*, loss.* (inside train.weights),
/// eval.*, data.*.
struct AppConfig {
    ModelConfig model;
    TrainConfig train;
    FidOptions eval;
    uint64_t eval_feature_seed = 0;  // seed of the random feature projector
    Augmentations aug;

    /// Assigns one dotted key. Unknown keys and unparseable values throw
    /// ConfigError naming the key.
    void set(const std::string& key, const std::string& value);

    /// Applies pairs in order (later assignments win).
    void apply(const std::vector<std::pair<std::string, std::string>>& pairs);

    /// Canonical "key = value" listing of every key, fixed order, one per
    /// line. Feeding it back through apply() reproduces this config.
    std::string echo() const;
};

/// Reads a flat key/value config file: one "key = value" per line, full-line
/// '#' comments, blank lines ignored. Returns pairs in file order; malformed
/// lines throw ConfigError with the line number, unreadable files IoError.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

/// Writes cfg.echo() to <out_dir>/effective_config.txt, creating the
/// directory if needed.
void write_effective_config(const AppConfig& cfg, const std::string& out_dir);

}  // namespace dsmap
