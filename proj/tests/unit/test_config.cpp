#include <sstream>
#include <string>

#include "doctest.h"
#include "flowcast/config.hpp"
#include "flowcast/errors.hpp"

using namespace flowcast;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_run_config(is);
}

std::string config_error(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults follow the reference architecture") {
    const RunConfig c = parse("");
    CHECK(c.transforms == 5);
    CHECK(c.base_hidden == std::vector<std::size_t>{512, 512});
    CHECK(c.conditioner_hidden == std::vector<std::size_t>{256, 256});
    CHECK(c.bins == 10);
    CHECK(c.bound == 5.0);
    CHECK(c.scenarios == 100);
    CHECK(c.lag == 6);
    CHECK(c.model == RunModel::Cnf);
    const FlowConfig f = c.flow_config(1, 6);
    CHECK(f.transforms == 5);
    CHECK(f.bins == 10);
}

TEST_CASE("comments, whitespace and overrides") {
    const RunConfig c = parse(
        "# case 3 run\n"
        "case = 3   # temporal\n"
        "model=nn_g\n"
        "  base_hidden = 64, 32\n"
        "lr = 0.001\n"
        "capacity = 100\n"
        "seed = 9\n");
    CHECK(c.case_id == 3);
    CHECK(c.model == RunModel::NnG);
    CHECK(c.base_hidden == std::vector<std::size_t>{64, 32});
    CHECK(c.train.lr0 == 0.001);
    CHECK(c.capacity.value() == 100.0);
    CHECK(c.seed == 9);
    CHECK(c.train.seed == 9);
    CHECK(c.resolved_horizon() == 6);
}

TEST_CASE("errors name the offending line") {
    CHECK(config_error("case = 2\nknots = 10\n").find("<config>:2:") != std::string::npos);
    CHECK(config_error("case = 5\n").find("<config>:1:") != std::string::npos);
    CHECK_FALSE(config_error("seed = 1\nseed = 2\n").empty());
    CHECK_FALSE(config_error("bins\n").empty());
    CHECK_FALSE(config_error("model = mdn\n").empty());
    CHECK_FALSE(config_error("split_train = 0.5\n").empty());
    CHECK_FALSE(config_error("base_hidden = 64,0\n").empty());
    CHECK_THROWS_AS(load_run_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("resolved snapshot reproduces the configuration") {
    const RunConfig c = parse("case = 4\nmodel = mupen\nbins = 20\ndata = /tmp/x.csv\ncapacity = 2.5\nlr_decay = 0.5\n");
    std::ostringstream os;
    write_run_config(os, c);
    const RunConfig back = parse(os.str());
    std::ostringstream os2;
    write_run_config(os2, back);
    CHECK(os.str() == os2.str());
    CHECK(back.case_id == 4);
    CHECK(back.model == RunModel::Mupen);
    CHECK(back.bins == 20);
    CHECK(back.data == "/tmp/x.csv");
    CHECK(back.capacity.value() == 2.5);
    CHECK(back.train.decay == 0.5);
    CHECK(back.horizon == 1);
    CHECK_THROWS_AS(back.flow_config(5, 30), ConfigError);
}
