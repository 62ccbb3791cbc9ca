#include "criteria.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <vector>

#include <unistd.h>

#include "flow_helpers.hpp"
#include "flowcast/autodiff.hpp"
#include "flowcast/baselines.hpp"
#include "flowcast/flow.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/parallel.hpp"
#include "flowcast/training.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

#ifdef FLOWCAST_HAVE_CLI
#include "cli.hpp"
#endif

namespace acceptance {

using namespace flowcast;
using ad::Tensor;
using testing_support::randomize;
using testing_support::small_config;
using testing_support::uniform_rows;

namespace {

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

private:
    using Clock = std::chrono::steady_clock;
    Clock::time_point start_ = Clock::now();
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

// Flow sizes for the training criteria: smaller than the reference architecture, same structure.
FlowConfig training_config(ModelKind kind, std::size_t dim, std::size_t ctx, bool unit_targets) {
    FlowConfig c;
    c.model = kind;
    c.dim = dim;
    c.context_dim = ctx;
    c.transforms = 3;
    c.base_hidden = {64, 64};
    c.conditioner_hidden = {64, 64};
    c.bins = 10;
    c.bound = 5.0;
    c.unit_interval_targets = unit_targets;
    c.seed = 1;
    return c;
}

TrainConfig training_schedule(std::size_t max_iters) {
    TrainConfig t;
    t.lr0 = 5e-3;
    t.decay = 0.5;
    t.decay_every = 1000;
    t.max_iters = max_iters;
    t.batch_size = 256;
    t.patience = 20;
    t.seed = 2;
    return t;
}

ConditionalFlow train(const FlowConfig& cfg, const Matrix& tx, const Matrix& ty, const Matrix& vx, const Matrix& vy,
                      std::size_t max_iters) {
    auto flow = make_flow(cfg);
    flow.set_feature_scaler(FeatureScaler::fit(tx.data, tx.cols));
    fit(flow, tx, ty, vx, vy, training_schedule(max_iters));
    return flow;
}

// ---------------------------------------------------------------- random graphs for criterion 2

// A graph is a replayable plan of ops over a pool of 3x4 tensors plus a 4x3 weight and a scalar.
struct Plan {
    struct Step {
        int op;
        std::size_t a, b;
    };
    std::vector<Step> steps;
    std::vector<std::uint8_t> mask;
};

Plan random_plan(Rng& rng) {
    Plan p;
    const std::size_t n_steps = 4 + rng.below(5);
    for (std::size_t s = 0; s < n_steps; ++s) {
        const std::size_t pool = 2 + s;
        p.steps.push_back({static_cast<int>(rng.below(18)), static_cast<std::size_t>(rng.below(pool)),
                           static_cast<std::size_t>(rng.below(pool))});
    }
    for (int i = 0; i < 12; ++i) p.mask.push_back(rng.below(2) ? 1 : 0);
    return p;
}

// leaves: A (3x4), B (3x4), W (4x3), c (1)
Tensor eval_plan(const Plan& p, const std::vector<Tensor>& leaves) {
    std::vector<Tensor> pool{leaves[0], leaves[1]};
    const Tensor& w = leaves[2];
    const Tensor& c = leaves[3];
    static const std::size_t order[] = {3, 1, 0, 2};
    for (const auto& s : p.steps) {
        const Tensor& x = pool[s.a];
        const Tensor& y = pool[s.b];
        Tensor r;
        switch (s.op) {
            case 0: r = x + y; break;
            case 1: r = x * y; break;
            case 2: r = x - 0.5 * y; break;
            case 3: r = x / (y * y + 1.0); break;
            case 4: r = ad::tanh(x); break;
            case 5: r = ad::sigmoid(x) * y; break;
            case 6: r = ad::softplus(x); break;
            case 7: r = ad::exp(ad::tanh(x)); break;
            case 8: r = ad::log(x * x + 0.5); break;
            case 9: r = ad::sqrt(x * x + 0.3); break;
            case 10: r = ad::softmax(x) * 3.0; break;
            case 11: r = ad::cumsum(x) * 0.3; break;
            case 12: r = ad::concat_last({ad::matmul(ad::tanh(x), w), ad::slice_last(y, 0, 1)}); break;
            case 13: r = ad::permute_last(x, order) - y; break;
            case 14: r = x * c + 1.0; break;
            case 15: r = ad::square(ad::tanh(x)) * 2.0 - y; break;
            case 16: r = ad::concat_last({ad::sum_last(ad::tanh(x)), ad::slice_last(y, 1, 4)}); break;
            default: r = ad::where(p.mask, x, ad::tanh(y)); break;
        }
        pool.push_back(r);
    }
    return ad::sum(pool.back()) + 0.5 * ad::mean(pool[pool.size() / 2]);
}

double graph_error(const Plan& plan, Rng& rng) {
    const std::vector<ad::Shape> shapes{{3, 4}, {3, 4}, {4, 3}, {1}};
    std::vector<std::vector<double>> values;
    for (const auto& s : shapes) {
        std::size_t n = 1;
        for (auto k : s) n *= k;
        values.push_back(uniform_rows(rng, n, -1.2, 1.2));
    }
    std::vector<Tensor> leaves;
    for (std::size_t i = 0; i < shapes.size(); ++i) leaves.push_back(Tensor::from(shapes[i], values[i], true));
    ad::backward(eval_plan(plan, leaves));
    double worst = 0.0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        auto f = [&](const std::vector<double>& v) {
            ad::NoGradGuard guard;
            std::vector<Tensor> ls;
            for (std::size_t j = 0; j < shapes.size(); ++j) ls.push_back(Tensor::from(shapes[j], j == i ? v : values[j]));
            return eval_plan(plan, ls).item();
        };
        // Leaves unused by the plan have no gradient; their true gradient is zero.
        std::vector<double> g = leaves[i].has_grad() ? leaves[i].grad() : std::vector<double>(values[i].size(), 0.0);
        worst = std::max(worst, oracle::max_rel_err(g, oracle::fd_gradient(f, values[i])));
    }
    return worst;
}

double flow_nll_error(std::uint64_t seed, Rng& rng) {
    const std::size_t d = 1 + seed % 3, ctx = 2, n = 12;
    auto cfg = small_config(ModelKind::Cnf, d, ctx, seed);
    cfg.conditioner_hidden = {8, 8};
    cfg.base_hidden = {8};
    cfg.unit_interval_targets = seed % 2 == 0;
    auto flow = make_flow(cfg);
    randomize(flow, rng, 0.5);
    const auto y = cfg.unit_interval_targets ? uniform_rows(rng, n * d, 0.05, 0.95) : uniform_rows(rng, n * d, -6, 6);
    const auto x = uniform_rows(rng, n * ctx, -1, 1);
    const auto params = flow.parameters();
    for (auto p : params) p.zero_grad();
    ad::backward(flow.nll(y, x));
    double worst = 0.0;
    // Central differences on a random subset of parameter entries.
    for (int k = 0; k < 60; ++k) {
        auto p = params[rng.below(params.size())];
        const std::size_t j = rng.below(p.numel());
        const double g = p.has_grad() ? p.grad()[j] : 0.0;
        const double orig = p.data()[j];
        ad::NoGradGuard guard;
        p.mutable_data()[j] = orig + 1e-5;
        const double up = flow.nll(y, x).item();
        p.mutable_data()[j] = orig - 1e-5;
        const double down = flow.nll(y, x).item();
        p.mutable_data()[j] = orig;
        worst = std::max(worst, oracle::rel_err(g, (up - down) / 2e-5));
    }
    return worst;
}

std::string write_bimodal_csv(const std::filesystem::path& path, std::size_t n, std::uint64_t seed) {
    const auto d = synthetic::bimodal(n, seed);
    std::ofstream out(path);
    out << "timestamp,power,ws10\n";
    out.precision(17);
    for (std::size_t i = 0; i < n; ++i) {
        // Affine rescale into [0, 1]; the rare far tail is clipped.
        const double p = std::clamp((d.y(i, 0) + 4.5) / 9.0, 0.0, 1.0);
        out << i * 3600 << ',' << p << ',' << d.x(i, 0) << '\n';
    }
    return path.string();
}

}  // namespace

Outcome bijection_suite() {
    Stopwatch clock;
    const std::size_t n = 100000, d = 3, ctx = 2;
    double worst_err = 0.0, worst_ld = 0.0, ld_lo = 0.0, ld_hi = 0.0;
    for (ModelKind kind : {ModelKind::Cnf, ModelKind::NnG, ModelKind::NnL}) {
        Rng rng(41 + static_cast<int>(kind));
        auto cfg = small_config(kind, d, ctx, 13);
        cfg.conditioner_hidden = {32, 32};
        auto flow = make_flow(cfg);
        // Uniform(-0.3, 0.3) weights give per-row log-dets of up to about +-8.
        randomize(flow, rng, 0.3);
        const auto y = kind == ModelKind::NnL ? uniform_rows(rng, n * d, 0.002, 0.998) : uniform_rows(rng, n * d, -8, 8);
        const auto x = uniform_rows(rng, n * ctx, -2, 2);
        ad::NoGradGuard guard;
        const auto xt = flow.context(x);
        const auto inv = flow.inverse_pass(Tensor::matrix(n, d, y), xt);
        const auto fwd = flow.forward_pass(inv.z0.data(), xt);
        for (std::size_t i = 0; i < y.size(); ++i) worst_err = std::max(worst_err, std::abs(fwd.y[i] - y[i]));
        for (std::size_t i = 0; i < n; ++i) {
            worst_ld = std::max(worst_ld, std::abs(fwd.log_det[i] + inv.log_det[i]));
            ld_lo = std::min(ld_lo, fwd.log_det[i]);
            ld_hi = std::max(ld_hi, fwd.log_det[i]);
        }
    }
    const double secs = clock.seconds();
    return verdict(worst_err < 1e-7 && worst_ld < 1e-8 && secs < 30.0,
                   "3 kinds x 1e5 points (d=3): max |f(f^-1(y)) - y| = " + fmt(worst_err) +
                       ", max |logdet sum| = " + fmt(worst_ld) + ", log-det range [" + fmt(ld_lo) + ", " + fmt(ld_hi) + "], " +
                       fmt(secs) + " s");
}

Outcome gradient_suite() {
    Stopwatch clock;
    Rng rng(2024);
    double worst_graph = 0.0, worst_flow = 0.0;
    for (int g = 0; g < 100; ++g) {
        if (g % 10 == 9) {
            worst_flow = std::max(worst_flow, flow_nll_error(static_cast<std::uint64_t>(g), rng));
        } else {
            worst_graph = std::max(worst_graph, graph_error(random_plan(rng), rng));
        }
    }
    const double secs = clock.seconds();
    return verdict(worst_graph < 1e-4 && worst_flow < 1e-4 && secs < 60.0,
                   "90 op graphs max rel err " + fmt(worst_graph) + ", 10 spline-flow NLLs max rel err " +
                       fmt(worst_flow) + ", " + fmt(secs) + " s");
}

Outcome density_normalization() {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        Rng rng(300 + i);
        const ModelKind kind = i % 4 == 3 ? ModelKind::NnG : ModelKind::Cnf;
        auto cfg = small_config(kind, 1, 2, 70 + i);
        cfg.unit_interval_targets = i % 2 == 1;
        auto flow = make_flow(cfg);
        randomize(flow, rng, 0.4);
        const ForecastDensity f(flow, uniform_rows(rng, 2, -1, 1));
        // Integrate over the central 1 - 2e-9 of the mass, so the truncation is negligible.
        const double lo = f.quantile(1e-9), hi = f.quantile(1.0 - 1e-9);
        const std::size_t points = 2001;
        std::vector<double> grid(points);
        for (std::size_t k = 0; k < points; ++k) grid[k] = lo + (hi - lo) * static_cast<double>(k) / (points - 1);
        const auto ld = f.log_density(grid);
        double total = 0.0;
        for (std::size_t k = 0; k < points; ++k) total += (k == 0 || k + 1 == points ? 0.5 : 1.0) * std::exp(ld[k]);
        total *= (hi - lo) / (points - 1);
        worst = std::max(worst, std::abs(total - 1.0));
    }
    return verdict(worst < 1e-3, "20 flows, 2001-point trapezoid: max |integral - 1| = " + fmt(worst));
}

Outcome autoregressive_structure() {
    const std::size_t d = 5;
    double worst_off = 0.0, weakest_diag = 1e300;
    for (ModelKind kind : {ModelKind::Cnf, ModelKind::NnG}) {
        auto cfg = small_config(kind, d, 2, 23);
        cfg.permute = false;
        auto flow = make_flow(cfg);
        Rng rng(77);
        randomize(flow, rng, 0.5);
        ad::NoGradGuard guard;
        for (int trial = 0; trial < 10; ++trial) {
            const auto y = uniform_rows(rng, d, -3, 3);
            const auto x = flow.context(uniform_rows(rng, 2, -1, 1));
            for (std::size_t j = 0; j < d; ++j) {
                auto yp = y, ym = y;
                yp[j] += 1e-5;
                ym[j] -= 1e-5;
                const auto zp = flow.inverse_pass(Tensor::matrix(1, d, yp), x).z0;
                const auto zm = flow.inverse_pass(Tensor::matrix(1, d, ym), x).z0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double dz = std::abs(zp[i] - zm[i]) / 2e-5;
                    if (i < j) worst_off = std::max(worst_off, dz);
                    if (i == j) weakest_diag = std::min(weakest_diag, dz);
                }
            }
        }
    }
    return verdict(worst_off < 1e-8 && weakest_diag > 0.0,
                   "d=5, max |dz_i/dy_j| above the diagonal = " + fmt(worst_off) + ", min diagonal = " +
                       fmt(weakest_diag));
}

Outcome metric_oracles() {
    const double crps_normal = crps_quadrature(
        [](std::span<const double> y) {
            std::vector<double> c;
            for (double v : y) c.push_back(oracle::Phi(v));
            return c;
        },
        -12.0, 12.0, 0.0);
    const double crps_uniform = crps_quadrature(
        [](std::span<const double> y) {
            std::vector<double> c;
            for (double v : y) c.push_back(std::clamp(v, 0.0, 1.0));
            return c;
        },
        0.0, 1.0, 0.5);
    const double closed = oracle::crps_gaussian(0.0, 1.0, 0.0);
    const double obs1[] = {0.5};
    const double es = energy_score(ScenarioSet{Matrix(2, 1, std::vector<double>{0.0, 1.0})}, obs1);
    const double obs2[] = {1.0, 0.0};
    const double vs = variogram_score(ScenarioSet{Matrix(1, 2, std::vector<double>{0.0, 0.0})}, obs2);
    Rng rng(5);
    bool same = true;
    for (int t = 0; t < 50; ++t) {
        const auto draws = uniform_rows(rng, 2 + rng.below(60), -3, 3);
        const double y = rng.uniform(-4, 4);
        const double obs[] = {y};
        same &= crps_samples(draws, y) == energy_score(ScenarioSet{Matrix(draws.size(), 1, draws)}, obs);
    }
    const bool ok = std::abs(crps_normal - 0.23370) < 1e-3 && std::abs(crps_normal - closed) < 1e-3 &&
                    std::abs(crps_uniform - 1.0 / 12.0) < 1e-4 && es == 0.25 && vs == 2.0 && same;
    return verdict(ok, "CRPS N(0,1)@0 = " + fmt(crps_normal) + " (closed form " + fmt(closed) + "), U(0,1)@0.5 = " +
                           std::to_string(crps_uniform) + ", ES = " + fmt(es) + ", VS = " + fmt(vs) +
                           (same ? ", crps_samples == ES" : ", crps_samples != ES"));
}

Outcome synthetic_recovery() {
    Stopwatch clock;
    const auto tr = synthetic::bimodal(20000, 1);
    const auto va = synthetic::bimodal(2000, 2);
    const auto te = synthetic::bimodal(5000, 3);
    const auto cnf = train(training_config(ModelKind::Cnf, 1, 1, false), tr.x, tr.y, va.x, va.y, 3000);
    const auto nng = train(training_config(ModelKind::NnG, 1, 1, false), tr.x, tr.y, va.x, va.y, 3000);
    const double nll_cnf = evaluate_nll(cnf, te.x, te.y);
    const double nll_nng = evaluate_nll(nng, te.x, te.y);
    double nll_true = 0.0;
    for (std::size_t i = 0; i < te.x.rows; ++i) nll_true -= synthetic::bimodal_log_density(te.x(i, 0), te.y(i, 0));
    nll_true /= static_cast<double>(te.x.rows);

    std::vector<double> levels;
    for (int l = 1; l <= 99; ++l) levels.push_back(l / 100.0);
    Matrix q(te.x.rows, levels.size());
    parallel_for(te.x.rows, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
            const auto v = ForecastDensity(cnf, {te.x(r, 0)}).quantiles(levels);
            std::copy(v.begin(), v.end(), q.row(r).begin());
        }
    });
    std::size_t crossings = 0;
    for (std::size_t r = 0; r < q.rows; ++r)
        for (std::size_t l = 1; l < q.cols; ++l) crossings += q(r, l) <= q(r, l - 1);
    const auto curve = reliability(q, te.y.data, levels);
    double worst_rel = 0.0;
    for (std::size_t l = 0; l < levels.size(); ++l)
        worst_rel = std::max(worst_rel, std::abs(curve.observed[l] - curve.nominal[l]));
    const double secs = clock.seconds();
    return verdict(nll_nng - nll_cnf >= 0.1 && worst_rel < 0.05 && crossings == 0 && secs < 300.0,
                   "test NLL CNF " + fmt(nll_cnf) + " vs NN-G " + fmt(nll_nng) + " (true law " + fmt(nll_true) +
                       "), max reliability gap over 99 levels " + fmt(worst_rel) + ", crossings " +
                       std::to_string(crossings) + ", " + fmt(secs) + " s");
}

Outcome gaussian_equivalence() {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        auto cfg = small_config(ModelKind::NnG, 1, 3, 50 + trial);
        cfg.unit_interval_targets = trial % 2 == 1;
        auto flow = make_flow(cfg);
        Rng rng(900 + trial);
        randomize(flow, rng, 0.6);
        const std::size_t n = 500;
        const auto x = uniform_rows(rng, n * 3, -1, 1);
        const auto y = cfg.unit_interval_targets ? uniform_rows(rng, n, 0.0, 1.0) : uniform_rows(rng, n, -3, 3);
        ad::NoGradGuard guard;
        const double model = flow.nll(y, x).item();
        // Closed form: the base Gaussian pushed through each affine map stays Gaussian.
        const auto xt = flow.context(x);
        const auto base = flow.base().params(xt);
        const auto& map = flow.target_map();
        double expected = 0.0;
        std::vector<std::vector<double>> raws;
        for (const auto& t : flow.transforms()) {
            const auto r = t.conditioner.context().forward(xt);
            raws.emplace_back(r.data().begin(), r.data().end());
        }
        for (std::size_t i = 0; i < n; ++i) {
            double mu = base.mu[i], sigma = base.sigma[i];
            for (const auto& raw : raws) {
                const double scale = std::log1p(std::exp(raw[2 * i + 1])) + 1e-6;
                mu = scale * mu + raw[2 * i];
                sigma *= scale;
            }
            // Data units: y = (u - offset) / scale_map.
            mu = (mu - map.offset) / map.scale;
            sigma /= map.scale;
            const double u = (y[i] - mu) / sigma;
            expected += 0.5 * u * u + std::log(sigma) + 0.5 * std::log(2.0 * std::numbers::pi);
        }
        expected /= static_cast<double>(n);
        worst = std::max(worst, std::abs(model - expected));
    }
    return verdict(worst < 1e-9, "10 random NN-G models, max |NLL - Gaussian NLL| = " + fmt(worst));
}

Outcome multivariate_ordering() {
    Stopwatch clock;
    const SeriesFrame frame = synthetic::ar1_series(10011, 17);
    const SupervisedSet rows = make_case(frame, 3);
    const SplitSets parts = split(rows);
    const auto& tr = parts.train;
    const auto& te = parts.test;
    const auto cnf = train(training_config(ModelKind::Cnf, 6, 6, true), tr.x, tr.y, parts.val.x, parts.val.y, 3000);
    const auto nng = train(training_config(ModelKind::NnG, 6, 6, true), tr.x, tr.y, parts.val.x, parts.val.y, 3000);
    const std::size_t n = std::min<std::size_t>(te.size(), 2000), s = 100;
    std::vector<double> es_cnf(n), es_nng(n), es_mupen(n);
    Rng master(99);
    std::vector<std::uint64_t> seeds(n);
    for (auto& sd : seeds) sd = master.engine()();
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
            Rng rng(seeds[r]);
            const auto obs = te.y.row(r);
            es_cnf[r] = energy_score({Matrix(s, 6, sample_scenarios(cnf, te.x.row(r), s, rng))}, obs);
            es_nng[r] = energy_score({Matrix(s, 6, sample_scenarios(nng, te.x.row(r), s, rng))}, obs);
            es_mupen[r] = energy_score(mupen_sample(tr.y, s, rng), obs);
        }
    });
    auto mean = [](const std::vector<double>& v) {
        double t = 0.0;
        for (double x : v) t += x;
        return t / static_cast<double>(v.size());
    };
    const double c = mean(es_cnf), g = mean(es_nng), m = mean(es_mupen);
    const double secs = clock.seconds();
    return verdict(c <= g && g <= 0.8 * m && c <= 0.8 * m && secs < 600.0,
                   "ES x100 over " + std::to_string(n) + " rows: CNF " + fmt(100 * c) + ", NN-G " + fmt(100 * g) +
                       ", MuPEn " + fmt(100 * m) + ", " + fmt(secs) + " s");
}

Outcome gefcom_reproduction() {
#ifdef FLOWCAST_HAVE_CLI
    const char* path = std::getenv("FLOWCAST_GEFCOM_CSV");
    if (path == nullptr || !std::filesystem::exists(path)) {
        return {Status::Skip, "set FLOWCAST_GEFCOM_CSV to a zone-1 CSV (timestamp,power,ws10,wd10,ws100,wd100)"};
    }
    Stopwatch clock;
    RunConfig cfg;
    cfg.case_id = 1;
    cfg.data = path;
    cfg.train.max_iters = 1000;
    const auto data = cli::prepare_data(cfg);
    const auto t = cli::train_model(cfg, data);
    const double train_secs = clock.seconds();
    const double crps = cli::test_crps_percent(t.model, data.parts.test, cfg.scenarios, cfg.seed);
    return verdict(crps >= 8.1 && crps <= 10.1 && train_secs < 600.0,
                   "test CRPS " + fmt(crps) + "% of capacity (band 8.1 to 10.1), training " + fmt(train_secs) + " s");
#else
    return {Status::Skip, "built without the CLI library"};
#endif
}

Outcome sweep_smoke() {
#ifdef FLOWCAST_HAVE_CLI
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("flowcast_sweep_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string data = write_bimodal_csv(dir / "bimodal.csv", 6000, 5);
    {
        std::ofstream c(dir / "sweep.cfg");
        c << "case = 1\nmodel = cnf\ntransforms = 2\nbase_hidden = 32, 32\nconditioner_hidden = 32, 32\n"
             "lr = 0.005\nlr_decay = 0.5\ndecay_every = 400\nmax_iters = 800\npatience = 20\nseed = 1\n"
             "data = bimodal.csv\n";
    }
    std::ostringstream out, err;
    const int code = cli::run({"sweep", (dir / "sweep.cfg").string(), "--knob", "bins", "--values", "5,10,20,50",
                               "--output", (dir / "sweep.csv").string()},
                              out, err);
    std::ifstream in(dir / "sweep.csv");
    std::string line, best_value;
    std::getline(in, line);
    std::size_t rows = 0;
    bool finite = true;
    double best = 1e300;
    std::string table;
    while (std::getline(in, line)) {
        ++rows;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        const double crps = f.size() == 5 ? std::strtod(f[2].c_str(), nullptr) : NAN;
        finite &= std::isfinite(crps) && std::isfinite(std::strtod(f.at(3).c_str(), nullptr));
        if (crps < best) {
            best = crps;
            best_value = f[1];
        }
        table += (table.empty() ? "" : " ") + f[1] + ":" + fmt(crps);
    }
    fs::remove_all(dir);
    return verdict(code == 0 && rows == 4 && finite,
                   "exit " + std::to_string(code) + ", CRPS by knots {" + table + "}, best at " + best_value +
                       (best_value == "5" ? " (best at the coarsest grid)" : " (best not at the coarsest grid)") +
                       (err.str().empty() ? "" : ", stderr: " + err.str()));
#else
    return {Status::Skip, "built without the CLI library"};
#endif
}

}  // namespace acceptance
