#pragma once

// Command-line front end: train, forecast, evaluate, sweep.
// Exit codes: 0 ok, 2 usage/config, 3 data, 4 numeric failure.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowcast/config.hpp"
#include "flowcast/data.hpp"
#include "flowcast/flow.hpp"
#include "flowcast/matrix.hpp"
#include "flowcast/training.hpp"

namespace flowcast::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct PreparedData {
    SupervisedSet rows;
    SplitSets parts;
};

/// Loads the configured CSV, builds the case layout, and splits it.
PreparedData prepare_data(const RunConfig& cfg);

/// A trained model of any kind: a flow, or the training targets for a naive baseline.
struct Model {
    RunModel kind = RunModel::Cnf;
    FlowConfig flow_config;
    std::optional<ConditionalFlow> flow;
    Matrix history;  // training targets (baselines)
    std::map<std::string, std::string> meta;

    std::size_t dim() const;
};

struct TrainOutcome {
    Model model;
    FitResult fit;
};

TrainOutcome train_model(const RunConfig& cfg, const PreparedData& data);

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

/// Mean test CRPS in percent of capacity (d = 1: quadrature; d > 1: average marginal sample CRPS).
double test_crps_percent(const Model& model, const SupervisedSet& test, std::size_t scenarios, std::uint64_t seed);

/// Scenario matrix (S x d) for each row of `x`, drawn from per-row child streams of `seed`.
std::vector<Matrix> forecast_scenarios(const Model& model, const Matrix& x, std::size_t count, std::uint64_t seed);

}  // namespace flowcast::cli
