#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "flowcast/baselines.hpp"
#include "flowcast/checkpoint.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/parallel.hpp"

namespace flowcast::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kBaselineMagic = "flowcast-baseline 1";
const std::vector<std::string> kValidMetrics{"crps", "es", "vs", "reliability", "pi_width", "coverage"};

std::string num(double v) {
    char buf[32];
    const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
    return std::string(buf, end);
}

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t\r");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw DataError(what + ": malformed number '" + s + "'");
    }
    return v;
}

std::ofstream open_output(const std::string& path) {
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    return out;
}

std::string meta_get(const std::map<std::string, std::string>& meta, const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw DataError("model file lacks '" + key + "' metadata");
    return it->second;
}

std::optional<double> meta_capacity(const std::map<std::string, std::string>& meta) {
    const std::string c = meta_get(meta, "capacity");
    if (c == "none") return std::nullopt;
    return parse_double(c, "capacity");
}

// ---------------------------------------------------------------- models

std::vector<std::uint64_t> child_seeds(std::uint64_t seed, std::size_t n) {
    Rng master(seed);
    std::vector<std::uint64_t> out(n);
    for (auto& s : out) s = master.engine()();
    return out;
}

Matrix empirical_draws(const Matrix& history, std::size_t count, Rng& rng) {
    Matrix m(count, history.cols);
    for (std::size_t s = 0; s < count; ++s) {
        const auto r = history.row(static_cast<std::size_t>(rng.below(history.rows)));
        std::copy(r.begin(), r.end(), m.row(s).begin());
    }
    return m;
}

std::vector<double> column(const Matrix& m, std::size_t c) {
    std::vector<double> out(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) out[r] = m(r, c);
    return out;
}

void require_context(const Model& model, const Matrix& x) {
    if (model.flow && x.cols != model.flow->context_dim()) {
        throw DataError("data yields " + std::to_string(x.cols) + " features per row, checkpoint expects " +
                        std::to_string(model.flow->context_dim()));
    }
}

std::vector<double> model_quantiles(const Model& model, std::span<const double> x, std::span<const double> alphas,
                                    const EmpiricalDist* clim) {
    if (model.dim() != 1) throw ConfigError("quantile forecasts need a univariate model (dim = 1)");
    switch (model.kind) {
        case RunModel::Climatology: {
            std::vector<double> q;
            for (double a : alphas) q.push_back(clim->quantile(a));
            return q;
        }
        case RunModel::Mupen: throw ConfigError("mupen produces scenarios only; use --scenarios");
        default: return ForecastDensity(*model.flow, {x.begin(), x.end()}).quantiles(alphas);
    }
}

// ---------------------------------------------------------------- CSV input for evaluate

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;
};

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    t.header = split_list(line);
    std::size_t no = 1;
    while (std::getline(in, line)) {
        ++no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_list(line);
        if (fields.size() != t.header.size()) {
            throw DataError(path + ":" + std::to_string(no) + ": expected " + std::to_string(t.header.size()) +
                            " fields");
        }
        t.rows.push_back(std::move(fields));
        t.lines.push_back(no);
    }
    if (t.rows.empty()) throw DataError(path + ": no data rows");
    return t;
}

// time -> per-dim observations
std::map<std::int64_t, std::vector<double>> read_truth(const std::string& path) {
    const Table t = read_table(path);
    const bool long_form = t.header == std::vector<std::string>{"time", "dim", "value"};
    if (!long_form && t.header != std::vector<std::string>{"time", "value"}) {
        throw DataError(path + ": truth header must be 'time,value' or 'time,dim,value'");
    }
    std::map<std::int64_t, std::vector<double>> out;
    for (const auto& r : t.rows) {
        const std::int64_t time = parse_timestamp(r[0]);
        const std::size_t dim = long_form ? static_cast<std::size_t>(parse_double(r[1], "dim")) : 0;
        auto& v = out[time];
        if (v.size() <= dim) v.resize(dim + 1, std::nan(""));
        v[dim] = parse_double(r.back(), path);
    }
    for (const auto& [time, v] : out)
        for (double x : v)
            if (std::isnan(x)) throw DataError(path + ": time " + std::to_string(time) + " has a missing dimension");
    return out;
}

[[noreturn]] void misaligned(const std::string& detail) { throw DataError("misaligned timestamps: " + detail); }

void check_same_times(const std::vector<std::int64_t>& forecast_times,
                      const std::map<std::int64_t, std::vector<double>>& truth) {
    if (forecast_times.size() != truth.size()) {
        misaligned(std::to_string(forecast_times.size()) + " forecast times vs " + std::to_string(truth.size()) +
                   " truth times");
    }
    for (std::int64_t t : forecast_times)
        if (!truth.count(t)) misaligned("forecast time " + std::to_string(t) + " has no observation");
}

// ---------------------------------------------------------------- commands

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg = load_run_config(path);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        const auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
            return s;
        };
        apply_setting(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (cfg.data.empty()) throw ConfigError(path + ": 'data' is not set");
    // Relative data paths are taken relative to the config file.
    if (fs::path(cfg.data).is_relative()) cfg.data = (fs::absolute(path).parent_path() / cfg.data).lexically_normal();
    cfg.output_dir = fs::absolute(cfg.output_dir).lexically_normal();
    return cfg;
}

int cmd_train(const std::string& config, const std::vector<std::string>& overrides, const std::string& out_dir,
              std::ostream& out) {
    RunConfig cfg = load_config(config, overrides);
    if (!out_dir.empty()) cfg.output_dir = fs::absolute(out_dir).lexically_normal();
    const PreparedData data = prepare_data(cfg);
    const TrainOutcome t = train_model(cfg, data);

    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    const std::string model_path = (dir / "model.ckpt").string();
    save_model(model_path, t.model);
    {
        auto h = open_output((dir / "history.csv").string());
        write_history_csv(h, t.fit.history);
    }
    {
        auto c = open_output((dir / "resolved.cfg").string());
        write_run_config(c, cfg);
    }
    out << "trained " << to_string(cfg.model) << " on " << data.parts.train.size() << " rows";
    if (!t.fit.history.empty()) out << "; best val NLL " << t.fit.best_val_nll << " at iteration " << t.fit.best_iter;
    out << "\nwrote " << model_path << ", " << (dir / "history.csv").string() << ", "
        << (dir / "resolved.cfg").string() << '\n';
    return kExitOk;
}

struct ForecastRequest {
    std::string checkpoint;
    std::string data;
    std::string quantiles;
    double interval = -1.0;
    std::size_t scenarios = 0;
    std::string rows = "test";
    std::uint64_t seed = 0;
    std::string output;
    std::string truth;
};

int cmd_forecast(const ForecastRequest& req, std::ostream& out) {
    const Model model = load_model(req.checkpoint);
    const int case_id = std::stoi(meta_get(model.meta, "case"));
    const std::size_t lag = std::stoul(meta_get(model.meta, "lag"));
    const std::size_t horizon = std::stoul(meta_get(model.meta, "horizon"));

    // Mode checks come before touching the data.
    std::vector<double> alphas;
    if (!req.quantiles.empty()) {
        if (model.dim() != 1) throw ConfigError("--quantiles needs a univariate checkpoint; this one has dim " +
                                                std::to_string(model.dim()) + " (use --scenarios)");
        for (const auto& a : split_list(req.quantiles)) {
            double v = 0;
            try {
                v = parse_double(a, "--quantiles");
            } catch (const DataError& e) {
                throw ConfigError(e.what());
            }
            if (!(v > 0.0 && v < 1.0)) throw ConfigError("--quantiles levels must lie in (0, 1)");
            alphas.push_back(v);
        }
        if (alphas.empty()) throw ConfigError("--quantiles needs at least one level");
    }
    if (req.interval >= 0.0) {
        if (!(req.interval > 0.0 && req.interval < 1.0)) throw ConfigError("--interval beta must lie in (0, 1)");
        if (model.dim() != 1) throw ConfigError("--interval needs a univariate checkpoint");
        alphas = {req.interval / 2.0, 1.0 - req.interval / 2.0};
    }
    if (model.kind == RunModel::Mupen && req.scenarios == 0) throw ConfigError("mupen produces scenarios only");

    const SeriesFrame frame = load_csv(req.data, meta_capacity(model.meta));
    SupervisedSet rows = make_case(frame, case_id, lag, horizon);
    if (req.rows == "test") {
        rows = split(rows, parse_double(meta_get(model.meta, "split_train"), "split"),
                     parse_double(meta_get(model.meta, "split_val"), "split"),
                     parse_double(meta_get(model.meta, "split_test"), "split"))
                   .test;
    } else if (req.rows != "all") {
        throw ConfigError("--rows must be 'test' or 'all'");
    }
    require_context(model, rows.x);
    if (rows.y.cols != model.dim()) {
        throw DataError("data yields targets of dim " + std::to_string(rows.y.cols) + ", model has dim " +
                        std::to_string(model.dim()));
    }

    std::ofstream file;
    std::ostream* os = &out;
    if (!req.output.empty()) {
        file = open_output(req.output);
        os = &file;
    }
    const std::size_t n = rows.size();
    std::optional<EmpiricalDist> clim;
    if (model.kind == RunModel::Climatology && model.dim() == 1) clim.emplace(column(model.history, 0));

    if (req.scenarios > 0) {
        const auto draws = forecast_scenarios(model, rows.x, req.scenarios, req.seed);
        *os << "time,scenario_id,dim,value\n";
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t s = 0; s < draws[r].rows; ++s)
                for (std::size_t k = 0; k < draws[r].cols; ++k)
                    *os << rows.target_start_times[r] << ',' << s << ',' << k << ',' << num(draws[r](s, k)) << '\n';
    } else {
        std::vector<std::vector<double>> q(n);
        parallel_for(n, [&](std::size_t b, std::size_t e) {
            for (std::size_t r = b; r < e; ++r) q[r] = model_quantiles(model, rows.x.row(r), alphas, clim ? &*clim : nullptr);
        });
        if (req.interval >= 0.0) {
            *os << "time,lower,upper\n";
            for (std::size_t r = 0; r < n; ++r)
                *os << rows.target_start_times[r] << ',' << num(q[r][0]) << ',' << num(q[r][1]) << '\n';
        } else {
            *os << "time,alpha,value\n";
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t a = 0; a < alphas.size(); ++a)
                    *os << rows.target_start_times[r] << ',' << num(alphas[a]) << ',' << num(q[r][a]) << '\n';
        }
    }
    if (!req.truth.empty()) {
        auto t = open_output(req.truth);
        t << "time,dim,value\n";
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t k = 0; k < rows.y.cols; ++k)
                t << rows.target_start_times[r] << ',' << k << ',' << num(rows.y(r, k)) << '\n';
    }
    return kExitOk;
}

struct EvaluateRequest {
    std::string forecast;
    std::string truth;
    std::string metrics;
    std::string model = "model";
    std::string case_id = "-";
    std::string output;
};

int cmd_evaluate(const EvaluateRequest& req, std::ostream& out) {
    std::vector<std::string> metrics = split_list(req.metrics);
    for (const auto& m : metrics) {
        if (std::find(kValidMetrics.begin(), kValidMetrics.end(), m) == kValidMetrics.end()) {
            std::string valid;
            for (const auto& v : kValidMetrics) valid += (valid.empty() ? "" : ", ") + v;
            throw ConfigError("unknown metric '" + m + "' (valid: " + valid + ")");
        }
    }
    const Table f = read_table(req.forecast);
    const auto truth = read_truth(req.truth);
    std::vector<ScoreRow> scores;
    auto add = [&](const std::string& metric, double value) { scores.push_back({req.model, req.case_id, metric, value}); };
    auto wants = [&](const std::string& m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
    auto reject = [&](const std::set<std::string>& allowed, const std::string& kind) {
        for (const auto& m : metrics)
            if (!allowed.count(m)) throw ConfigError("metric '" + m + "' does not apply to " + kind + " forecasts");
    };

    if (f.header == std::vector<std::string>{"time", "alpha", "value"}) {
        if (metrics.empty()) metrics = {"crps", "reliability"};
        reject({"crps", "reliability"}, "quantile");
        std::vector<std::int64_t> times;
        std::map<std::int64_t, std::vector<std::pair<double, double>>> by_time;
        for (std::size_t i = 0; i < f.rows.size(); ++i) {
            const std::int64_t t = parse_timestamp(f.rows[i][0]);
            if (!by_time.count(t)) times.push_back(t);
            by_time[t].emplace_back(parse_double(f.rows[i][1], req.forecast), parse_double(f.rows[i][2], req.forecast));
        }
        check_same_times(times, truth);
        const auto& levels0 = by_time[times.front()];
        double crps = 0.0;
        std::vector<double> hits(levels0.size(), 0.0);
        for (std::int64_t t : times) {
            auto& qs = by_time[t];
            std::sort(qs.begin(), qs.end());
            if (qs.size() != levels0.size()) misaligned("time " + std::to_string(t) + " has a different level set");
            const auto& obs = truth.at(t);
            if (obs.size() != 1) throw DataError("quantile forecasts need univariate truth");
            std::vector<double> a, v;
            for (std::size_t l = 0; l < qs.size(); ++l) {
                if (qs[l].first != levels0[l].first) misaligned("time " + std::to_string(t) + " has a different level set");
                a.push_back(qs[l].first);
                v.push_back(qs[l].second);
                if (obs[0] <= qs[l].second) hits[l] += 1.0;
            }
            crps += crps_from_quantiles(a, v, obs[0]);
        }
        const double n = static_cast<double>(times.size());
        if (wants("crps")) add("crps", 100.0 * crps / n);
        if (wants("reliability"))
            for (std::size_t l = 0; l < levels0.size(); ++l) add("reliability@" + num(levels0[l].first), hits[l] / n);
    } else if (f.header == std::vector<std::string>{"time", "scenario_id", "dim", "value"}) {
        if (metrics.empty()) metrics = {"crps", "es", "vs"};
        reject({"crps", "es", "vs"}, "scenario");
        std::vector<std::int64_t> times;
        std::map<std::int64_t, std::map<std::pair<std::size_t, std::size_t>, double>> by_time;
        for (const auto& r : f.rows) {
            const std::int64_t t = parse_timestamp(r[0]);
            if (!by_time.count(t)) times.push_back(t);
            const auto s = static_cast<std::size_t>(parse_double(r[1], req.forecast));
            const auto k = static_cast<std::size_t>(parse_double(r[2], req.forecast));
            by_time[t][{s, k}] = parse_double(r[3], req.forecast);
        }
        check_same_times(times, truth);
        double crps = 0.0, es = 0.0, vs = 0.0;
        for (std::int64_t t : times) {
            const auto& cells = by_time[t];
            const auto& obs = truth.at(t);
            const std::size_t d = obs.size();
            const std::size_t s = cells.rbegin()->first.first + 1;
            if (cells.size() != s * d) misaligned("time " + std::to_string(t) + " does not hold S x d scenario values");
            ScenarioSet set{Matrix(s, d)};
            for (const auto& [key, v] : cells) {
                if (key.second >= d) misaligned("time " + std::to_string(t) + " has more dimensions than the truth");
                set.draws(key.first, key.second) = v;
            }
            double c = 0.0;
            for (std::size_t k = 0; k < d; ++k) c += crps_samples(column(set.draws, k), obs[k]);
            crps += c / static_cast<double>(d);
            es += energy_score(set, obs);
            vs += variogram_score(set, obs);
        }
        const double n = static_cast<double>(times.size());
        if (wants("crps")) add("crps", 100.0 * crps / n);
        if (wants("es")) add("es", 100.0 * es / n);
        if (wants("vs")) add("vs", vs / n);
    } else if (f.header == std::vector<std::string>{"time", "lower", "upper"}) {
        if (metrics.empty()) metrics = {"pi_width", "coverage"};
        reject({"pi_width", "coverage"}, "interval");
        std::vector<std::int64_t> times;
        std::vector<double> lo, hi;
        double covered = 0.0;
        for (const auto& r : f.rows) {
            times.push_back(parse_timestamp(r[0]));
            lo.push_back(parse_double(r[1], req.forecast));
            hi.push_back(parse_double(r[2], req.forecast));
        }
        check_same_times(times, truth);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double y = truth.at(times[i]).at(0);
            if (y >= lo[i] && y <= hi[i]) covered += 1.0;
        }
        if (wants("pi_width")) add("pi_width", 100.0 * pi_width(lo, hi));
        if (wants("coverage")) add("coverage", covered / static_cast<double>(times.size()));
    } else {
        throw DataError(req.forecast + ": unrecognized forecast header");
    }

    if (req.output.empty()) {
        write_score_report(out, scores);
    } else {
        auto o = open_output(req.output);
        write_score_report(o, scores);
    }
    return kExitOk;
}

int cmd_sweep(const std::string& config, const std::vector<std::string>& overrides, const std::string& knob,
              const std::string& values, const std::string& output, std::ostream& out) {
    const RunConfig base = load_config(config, overrides);
    if (base.model != RunModel::Cnf && base.model != RunModel::NnG && base.model != RunModel::NnL) {
        throw ConfigError("sweep needs a flow model");
    }
    std::vector<std::string> list = split_list(values);
    if (list.empty()) {
        if (knob == "bins") list = {"5", "10", "20", "50"};
        else if (knob == "transforms") list = {"1", "2", "3", "4", "5"};
        else if (knob == "hidden") list = {"64", "256", "512"};
    }
    if (knob != "bins" && knob != "transforms" && knob != "hidden") {
        throw ConfigError("--knob must be one of bins, transforms, hidden");
    }
    const PreparedData data = prepare_data(base);
    std::ofstream file;
    std::ostream* os = &out;
    if (!output.empty()) {
        file = open_output(output);
        os = &file;
    }
    *os << "knob,value,crps,best_val_nll,iterations\n";
    for (const std::string& v : list) {
        RunConfig cfg = base;
        if (knob == "hidden") {
            apply_setting(cfg, "conditioner_hidden", v + "," + v);
        } else {
            apply_setting(cfg, knob, v);
        }
        const TrainOutcome t = train_model(cfg, data);
        const double crps = test_crps_percent(t.model, data.parts.test, cfg.scenarios, cfg.seed);
        *os << knob << ',' << v << ',' << num(crps) << ',' << num(t.fit.best_val_nll) << ',' << t.fit.iterations
            << '\n';
        os->flush();
    }
    return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------- library pieces

std::size_t Model::dim() const { return flow ? flow->dim() : history.cols; }

PreparedData prepare_data(const RunConfig& cfg) {
    const SeriesFrame frame = load_csv(cfg.data, cfg.capacity);
    PreparedData d;
    d.rows = make_case(frame, cfg.case_id, cfg.lag, cfg.resolved_horizon());
    d.parts = split(d.rows, cfg.split_train, cfg.split_val, cfg.split_test);
    return d;
}

TrainOutcome train_model(const RunConfig& cfg, const PreparedData& data) {
    TrainOutcome t;
    Model& m = t.model;
    m.kind = cfg.model;
    m.meta = {{"case", std::to_string(cfg.case_id)},
              {"lag", std::to_string(cfg.lag)},
              {"horizon", std::to_string(cfg.resolved_horizon())},
              {"capacity", cfg.capacity ? num(*cfg.capacity) : "none"},
              {"split_train", num(cfg.split_train)},
              {"split_val", num(cfg.split_val)},
              {"split_test", num(cfg.split_test)},
              {"model", to_string(cfg.model)}};
    const SupervisedSet& train = data.parts.train;
    if (cfg.model == RunModel::Climatology || cfg.model == RunModel::Mupen) {
        m.history = train.y;
        return t;
    }
    m.flow_config = cfg.flow_config(train.y.cols, train.x.cols);
    m.flow = make_flow(m.flow_config);
    m.flow->set_feature_scaler(FeatureScaler::fit(train.x.data, train.x.cols));
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    t.fit = fit(*m.flow, train.x, train.y, data.parts.val.x, data.parts.val.y, tc);
    return t;
}

void save_model(const std::string& path, const Model& model) {
    if (model.flow) {
        auto out = open_output(path);
        save_checkpoint(out, *model.flow, model.flow_config, model.meta);
        return;
    }
    auto out = open_output(path);
    out << kBaselineMagic << '\n';
    out << "model=" << to_string(model.kind) << '\n';
    for (const auto& [k, v] : model.meta)
        if (k != "model") out << k << '=' << v << '\n';
    out << "dim=" << model.history.cols << "\nrows=" << model.history.rows << "\ndata\n";
    for (std::size_t r = 0; r < model.history.rows; ++r) {
        for (std::size_t c = 0; c < model.history.cols; ++c) out << (c ? "," : "") << num(model.history(r, c));
        out << '\n';
    }
    if (!out) throw DataError("cannot write '" + path + "'");
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file '" + path + "'");
    std::string head(8, '\0');
    in.read(head.data(), 8);
    in.clear();
    in.seekg(0);
    Model m;
    if (head == "FLOWCAST") {
        Checkpoint ck = load_checkpoint(in);
        m.flow_config = ck.config;
        m.flow = std::move(ck.flow);
        m.meta = std::move(ck.meta);
        const auto it = m.meta.find("model");
        m.kind = it != m.meta.end() ? run_model_from_string(it->second) : RunModel::Cnf;
        return m;
    }
    std::string line;
    std::getline(in, line);
    if (line != kBaselineMagic) throw DataError("'" + path + "' is not a flowcast model file");
    std::size_t dim = 0, rows = 0;
    while (std::getline(in, line) && line != "data") {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError(path + ": malformed header line '" + line + "'");
        m.meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    try {
        m.kind = run_model_from_string(meta_get(m.meta, "model"));
    } catch (const ConfigError& e) {
        throw DataError(path + ": " + e.what());
    }
    dim = static_cast<std::size_t>(parse_double(meta_get(m.meta, "dim"), path));
    rows = static_cast<std::size_t>(parse_double(meta_get(m.meta, "rows"), path));
    m.history = Matrix(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw DataError(path + ": truncated baseline data");
        const auto f = split_list(line);
        if (f.size() != dim) throw DataError(path + ": baseline row " + std::to_string(r) + " has wrong width");
        for (std::size_t c = 0; c < dim; ++c) m.history(r, c) = parse_double(f[c], path);
    }
    if (rows == 0) throw DataError(path + ": baseline holds no rows");
    return m;
}

std::vector<Matrix> forecast_scenarios(const Model& model, const Matrix& x, std::size_t count, std::uint64_t seed) {
    require_context(model, x);
    const auto seeds = child_seeds(seed, x.rows);
    std::vector<Matrix> out(x.rows);
    parallel_for(x.rows, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
            Rng rng(seeds[r]);
            switch (model.kind) {
                case RunModel::Mupen: out[r] = mupen_sample(model.history, count, rng).draws; break;
                case RunModel::Climatology: out[r] = empirical_draws(model.history, count, rng); break;
                default:
                    out[r] = Matrix(count, model.dim(), sample_scenarios(*model.flow, x.row(r), count, rng));
                    break;
            }
        }
    });
    return out;
}

double test_crps_percent(const Model& model, const SupervisedSet& test, std::size_t scenarios, std::uint64_t seed) {
    const std::size_t n = test.size();
    if (n == 0) throw DataError("empty test set");
    std::vector<double> per_row(n, 0.0);
    if (model.dim() == 1 && model.kind == RunModel::Climatology) {
        const EmpiricalDist clim(column(model.history, 0));
        for (std::size_t r = 0; r < n; ++r) per_row[r] = clim.crps(test.y(r, 0));
    } else if (model.dim() == 1 && model.flow) {
        require_context(model, test.x);
        parallel_for(n, [&](std::size_t b, std::size_t e) {
            for (std::size_t r = b; r < e; ++r) {
                const ForecastDensity f(*model.flow, {test.x.row(r).begin(), test.x.row(r).end()});
                per_row[r] = crps_quadrature(f, test.y(r, 0));
            }
        });
    } else {
        const auto draws = forecast_scenarios(model, test.x, scenarios, seed);
        for (std::size_t r = 0; r < n; ++r) {
            double c = 0.0;
            for (std::size_t k = 0; k < model.dim(); ++k) c += crps_samples(column(draws[r], k), test.y(r, k));
            per_row[r] = c / static_cast<double>(model.dim());
        }
    }
    return 100.0 * std::accumulate(per_row.begin(), per_row.end(), 0.0) / static_cast<double>(n);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"flowcast: conditional normalizing flows for probabilistic wind power forecasting", "flowcast"};
    app.require_subcommand(1);

    std::string config, out_dir;
    std::vector<std::string> overrides;
    auto* train = app.add_subcommand("train", "Train a model from a run configuration");
    train->add_option("config", config, "Run configuration file")->required();
    train->add_option("--set", overrides, "Override a config entry (key=value), repeatable");
    train->add_option("--output-dir", out_dir, "Directory for checkpoint, history and resolved config");

    ForecastRequest fr;
    auto* forecast = app.add_subcommand("forecast", "Produce quantile, interval or scenario forecasts");
    forecast->add_option("--checkpoint", fr.checkpoint, "Model file written by train")->required();
    forecast->add_option("--data", fr.data, "Series CSV")->required();
    auto* q = forecast->add_option("--quantiles", fr.quantiles, "Comma-separated quantile levels");
    auto* iv = forecast->add_option("--interval", fr.interval, "Central interval with miscoverage beta");
    auto* sc = forecast->add_option("--scenarios", fr.scenarios, "Number of joint scenarios per time");
    q->excludes(iv)->excludes(sc);
    iv->excludes(sc);
    forecast->add_option("--rows", fr.rows, "Rows to forecast: test (default) or all");
    forecast->add_option("--seed", fr.seed, "Sampling seed");
    forecast->add_option("--output", fr.output, "Output CSV (default stdout)");
    forecast->add_option("--truth", fr.truth, "Also write the matching observations (time,dim,value)");

    EvaluateRequest er;
    auto* evaluate = app.add_subcommand("evaluate", "Score forecasts against observations");
    evaluate->add_option("--forecast", er.forecast, "Forecast CSV")->required();
    evaluate->add_option("--truth", er.truth, "Observation CSV (time,value or time,dim,value)")->required();
    evaluate->add_option("--metrics", er.metrics, "Comma-separated: crps,es,vs,reliability,pi_width,coverage");
    evaluate->add_option("--model", er.model, "Model label for the report");
    evaluate->add_option("--case", er.case_id, "Case label for the report");
    evaluate->add_option("--output", er.output, "Score report CSV (default stdout)");

    std::string sweep_config, knob = "bins", values, sweep_out;
    std::vector<std::string> sweep_overrides;
    auto* sweep = app.add_subcommand("sweep", "Retrain over one hyperparameter axis and report test CRPS");
    sweep->add_option("config", sweep_config, "Run configuration file")->required();
    sweep->add_option("--knob", knob, "bins, transforms or hidden");
    sweep->add_option("--values", values, "Comma-separated values (defaults per knob)");
    sweep->add_option("--set", sweep_overrides, "Override a config entry (key=value), repeatable");
    sweep->add_option("--output", sweep_out, "CSV path (default stdout)");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        if (app.get_subcommands().empty()) err << app.help();
        return kExitUsage;
    }

    try {
        if (train->parsed()) return cmd_train(config, overrides, out_dir, out);
        if (forecast->parsed()) {
            if (fr.quantiles.empty() && fr.interval < 0.0 && fr.scenarios == 0) {
                throw ConfigError("forecast needs one of --quantiles, --interval or --scenarios");
            }
            return cmd_forecast(fr, out);
        }
        if (evaluate->parsed()) return cmd_evaluate(er, out);
        if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_overrides, knob, values, sweep_out, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace flowcast::cli
