#include "flowcast/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "flowcast/data.hpp"
#include "flowcast/errors.hpp"

namespace flowcast {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = v.find(',', start);
        const std::string piece = trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        const std::size_t n = to_size(key, piece);
        if (n == 0) throw ConfigError(key + ": layer widths must be positive");
        out.push_back(n);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string sizes_text(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::string num_text(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string to_string(RunModel model) {
    switch (model) {
        case RunModel::Cnf: return "cnf";
        case RunModel::NnG: return "nn_g";
        case RunModel::NnL: return "nn_l";
        case RunModel::Climatology: return "climatology";
        case RunModel::Mupen: return "mupen";
    }
    return "?";
}

RunModel run_model_from_string(const std::string& name) {
    for (RunModel m : {RunModel::Cnf, RunModel::NnG, RunModel::NnL, RunModel::Climatology, RunModel::Mupen})
        if (to_string(m) == name) return m;
    throw ConfigError("unknown model '" + name + "' (valid: cnf, nn_g, nn_l, climatology, mupen)");
}

FlowConfig RunConfig::flow_config(std::size_t dim, std::size_t context_dim) const {
    FlowConfig f;
    switch (model) {
        case RunModel::Cnf: f.model = ModelKind::Cnf; break;
        case RunModel::NnG: f.model = ModelKind::NnG; break;
        case RunModel::NnL: f.model = ModelKind::NnL; break;
        default: throw ConfigError("model '" + to_string(model) + "' is not a flow");
    }
    f.dim = dim;
    f.context_dim = context_dim;
    f.transforms = transforms;
    f.base_hidden = base_hidden;
    f.conditioner_hidden = conditioner_hidden;
    f.bins = bins;
    f.bound = bound;
    f.learned_base = learned_base;
    f.permute = permute;
    f.unit_interval_targets = unit_interval_targets;
    f.unit_margin = unit_margin;
    f.logit_epsilon = logit_epsilon;
    f.seed = seed;
    return f;
}

std::size_t RunConfig::resolved_horizon() const { return horizon == 0 ? default_horizon(case_id) : horizon; }

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    const std::string& v = value;
    if (key == "case") {
        const std::size_t id = to_size(key, v);
        if (id < 1 || id > 4) throw ConfigError("case: must be 1, 2, 3 or 4");
        c.case_id = static_cast<int>(id);
    } else if (key == "model") {
        c.model = run_model_from_string(v);
    } else if (key == "transforms") {
        c.transforms = to_size(key, v);
        if (c.transforms == 0) throw ConfigError("transforms: must be positive");
    } else if (key == "base_hidden") {
        c.base_hidden = to_sizes(key, v);
    } else if (key == "conditioner_hidden") {
        c.conditioner_hidden = to_sizes(key, v);
    } else if (key == "bins") {
        c.bins = to_size(key, v);
        if (c.bins == 0) throw ConfigError("bins: must be positive");
    } else if (key == "bound") {
        c.bound = to_double(key, v);
        if (!(c.bound > 0.0)) throw ConfigError("bound: must be positive");
    } else if (key == "learned_base") {
        c.learned_base = to_bool(key, v);
    } else if (key == "permute") {
        c.permute = to_bool(key, v);
    } else if (key == "unit_interval_targets") {
        c.unit_interval_targets = to_bool(key, v);
    } else if (key == "unit_margin") {
        c.unit_margin = to_double(key, v);
    } else if (key == "logit_epsilon") {
        c.logit_epsilon = to_double(key, v);
        if (!(c.logit_epsilon > 0.0 && c.logit_epsilon < 0.5)) throw ConfigError("logit_epsilon: must be in (0, 0.5)");
    } else if (key == "lr") {
        c.train.lr0 = to_double(key, v);
        if (!(c.train.lr0 > 0.0)) throw ConfigError("lr: must be positive");
    } else if (key == "lr_decay") {
        c.train.decay = to_double(key, v);
    } else if (key == "decay_every") {
        c.train.decay_every = to_size(key, v);
        if (c.train.decay_every == 0) throw ConfigError("decay_every: must be positive");
    } else if (key == "max_iters") {
        c.train.max_iters = to_size(key, v);
    } else if (key == "batch_size") {
        c.train.batch_size = to_size(key, v);
        if (c.train.batch_size == 0) throw ConfigError("batch_size: must be positive");
    } else if (key == "eval_every") {
        c.train.eval_every = to_size(key, v);
        if (c.train.eval_every == 0) throw ConfigError("eval_every: must be positive");
    } else if (key == "patience") {
        c.train.patience = to_size(key, v);
    } else if (key == "clip_norm") {
        c.train.clip_norm = to_double(key, v);
    } else if (key == "scenarios") {
        c.scenarios = to_size(key, v);
        if (c.scenarios == 0) throw ConfigError("scenarios: must be positive");
    } else if (key == "seed") {
        c.seed = to_size(key, v);
    } else if (key == "lag") {
        c.lag = to_size(key, v);
        if (c.lag == 0) throw ConfigError("lag: must be positive");
    } else if (key == "horizon") {
        c.horizon = to_size(key, v);
    } else if (key == "capacity") {
        if (v.empty() || v == "none") {
            c.capacity.reset();
        } else {
            c.capacity = to_double(key, v);
            if (!(*c.capacity > 0.0)) throw ConfigError("capacity: must be positive");
        }
    } else if (key == "split_train") {
        c.split_train = to_double(key, v);
    } else if (key == "split_val") {
        c.split_val = to_double(key, v);
    } else if (key == "split_test") {
        c.split_test = to_double(key, v);
    } else if (key == "data") {
        c.data = v;
    } else if (key == "output_dir") {
        c.output_dir = v;
    } else {
        throw ConfigError("unknown key '" + key + "'");
    }
    c.train.seed = c.seed;
}

RunConfig parse_run_config(std::istream& is, const std::string& source) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    for (std::string line; std::getline(is, line);) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
        try {
            apply_setting(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    if (std::abs(cfg.split_train + cfg.split_val + cfg.split_test - 1.0) > 1e-9) {
        throw ConfigError(source + ": split ratios must sum to 1");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse_run_config(in, path);
}

void write_run_config(std::ostream& os, const RunConfig& c) {
    auto b = [](bool x) { return x ? "true" : "false"; };
    os << "# resolved configuration\n"
       << "case = " << c.case_id << '\n'
       << "model = " << to_string(c.model) << '\n'
       << "transforms = " << c.transforms << '\n'
       << "base_hidden = " << sizes_text(c.base_hidden) << '\n'
       << "conditioner_hidden = " << sizes_text(c.conditioner_hidden) << '\n'
       << "bins = " << c.bins << '\n'
       << "bound = " << num_text(c.bound) << '\n'
       << "learned_base = " << b(c.learned_base) << '\n'
       << "permute = " << b(c.permute) << '\n'
       << "unit_interval_targets = " << b(c.unit_interval_targets) << '\n'
       << "unit_margin = " << num_text(c.unit_margin) << '\n'
       << "logit_epsilon = " << num_text(c.logit_epsilon) << '\n'
       << "lr = " << num_text(c.train.lr0) << '\n'
       << "lr_decay = " << num_text(c.train.decay) << '\n'
       << "decay_every = " << c.train.decay_every << '\n'
       << "max_iters = " << c.train.max_iters << '\n'
       << "batch_size = " << c.train.batch_size << '\n'
       << "eval_every = " << c.train.eval_every << '\n'
       << "patience = " << c.train.patience << '\n'
       << "clip_norm = " << num_text(c.train.clip_norm) << '\n'
       << "scenarios = " << c.scenarios << '\n'
       << "seed = " << c.seed << '\n'
       << "lag = " << c.lag << '\n'
       << "horizon = " << c.resolved_horizon() << '\n'
       << "capacity = " << (c.capacity ? num_text(*c.capacity) : std::string("none")) << '\n'
       << "split_train = " << num_text(c.split_train) << '\n'
       << "split_val = " << num_text(c.split_val) << '\n'
       << "split_test = " << num_text(c.split_test) << '\n'
       << "data = " << c.data << '\n'
       << "output_dir = " << c.output_dir << '\n';
}

}  // namespace flowcast
