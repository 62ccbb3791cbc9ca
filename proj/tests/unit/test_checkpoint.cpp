#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "flow_helpers.hpp"
#include "flowcast/checkpoint.hpp"
#include "flowcast/errors.hpp"

using namespace flowcast;
using testing_support::randomize;
using testing_support::small_config;

namespace {

std::string save(const ConditionalFlow& flow, const FlowConfig& cfg, const std::map<std::string, std::string>& meta = {}) {
    std::ostringstream os(std::ios::binary);
    save_checkpoint(os, flow, cfg, meta);
    return os.str();
}

Checkpoint load(const std::string& bytes) {
    std::istringstream is(bytes, std::ios::binary);
    return load_checkpoint(is);
}

}  // namespace

TEST_CASE("round trip preserves the predictive law and the bytes") {
    for (ModelKind kind : {ModelKind::Cnf, ModelKind::NnG, ModelKind::NnL}) {
        auto cfg = small_config(kind, 3, 2, 5);
        cfg.unit_interval_targets = true;
        auto flow = make_flow(cfg);
        Rng rng(1);
        randomize(flow, rng, 0.3);
        flow.set_feature_scaler({{0.5, -1.0}, {2.0, 0.25}});
        const std::string bytes = save(flow, cfg, {{"case", "3"}, {"horizon", "6"}});
        CHECK(bytes.compare(0, 8, "FLOWCAST") == 0);
        const Checkpoint ck = load(bytes);
        CHECK(ck.meta.at("case") == "3");
        CHECK(ck.meta.at("horizon") == "6");
        CHECK(ck.config.dim == 3);
        CHECK(save(ck.flow, ck.config, ck.meta) == bytes);

        const std::vector<double> y{0.2, 0.5, 0.7, 0.1, 0.9, 0.4};
        const std::vector<double> x{0.3, 0.1, -0.2, 0.6};
        CHECK(flow.nll(y, x).item() == ck.flow.nll(y, x).item());
    }
}

TEST_CASE("corrupt containers are rejected") {
    auto cfg = small_config(ModelKind::Cnf, 1, 1, 5);
    const auto flow = make_flow(cfg);
    const std::string bytes = save(flow, cfg);
    CHECK_THROWS_AS(load("NOTAFLOW" + bytes.substr(8)), DataError);
    CHECK_THROWS_AS(load(bytes.substr(0, bytes.size() - 3)), DataError);
    std::string bumped = bytes;
    bumped[8] = 9;  // version field
    CHECK_THROWS_AS(load(bumped), DataError);
    CHECK_THROWS_AS(load_checkpoint(std::string("/nonexistent/flow.ckpt")), DataError);
}

TEST_CASE("tensor shapes must match the declared architecture") {
    auto cfg = small_config(ModelKind::Cnf, 1, 1, 5);
    const std::string bytes = save(make_flow(cfg), cfg);
    // Change the declared bin count in the header without touching the tensors.
    std::string edited = bytes;
    const auto pos = edited.find("bins=8");
    REQUIRE(pos != std::string::npos);
    edited[pos + 5] = '9';
    CHECK_THROWS_AS(load(edited), DataError);
}

TEST_CASE("metadata may not break the header") {
    auto cfg = small_config(ModelKind::NnG, 1, 1, 5);
    const auto flow = make_flow(cfg);
    CHECK_THROWS_AS(save(flow, cfg, {{"bad=key", "1"}}), ConfigError);
}
