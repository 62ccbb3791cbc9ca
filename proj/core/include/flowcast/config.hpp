#pragma once

// Run configuration: a flat `key = value` text format with `#` comments.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowcast/flow.hpp"
#include "flowcast/training.hpp"

namespace flowcast {

enum class RunModel { Cnf, NnG, NnL, Climatology, Mupen };

std::string to_string(RunModel model);
RunModel run_model_from_string(const std::string& name);

struct RunConfig {
    int case_id = 2;
    RunModel model = RunModel::Cnf;
    std::size_t transforms = 5;
    std::vector<std::size_t> base_hidden{512, 512};
    std::vector<std::size_t> conditioner_hidden{256, 256};
    std::size_t bins = 10;
    double bound = 5.0;
    bool learned_base = true;
    bool permute = true;
    bool unit_interval_targets = true;
    double unit_margin = 0.5;
    double logit_epsilon = 1e-3;
    TrainConfig train;
    std::size_t scenarios = 100;
    std::uint64_t seed = 0;
    std::size_t lag = 6;
    std::size_t horizon = 0;  // 0 selects the case default
    std::optional<double> capacity;
    double split_train = 0.7;
    double split_val = 0.1;
    double split_test = 0.2;
    std::string data;
    std::string output_dir = ".";

    /// Flow architecture for the given data dimensions (flow models only).
    FlowConfig flow_config(std::size_t dim, std::size_t context_dim) const;
    /// Horizon after substituting the case default.
    std::size_t resolved_horizon() const;
};

/// Throws ConfigError naming the line on unknown keys, duplicates, or bad values.
/// Relative `data`/`output_dir` paths stay as written.
RunConfig parse_run_config(std::istream& is, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);
/// Applies one `key=value` assignment on top of an existing config.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// Every key with its resolved value; parsing the output reproduces the config.
void write_run_config(std::ostream& os, const RunConfig& cfg);

}  // namespace flowcast
