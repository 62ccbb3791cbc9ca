#include "flowcast/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "flowcast/errors.hpp"
#include "flowcast/parallel.hpp"
#include "flowcast/random.hpp"

namespace flowcast {

double lr_at(const TrainConfig& cfg, std::size_t iter) {
    return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(iter / cfg.decay_every));
}

AdamState make_adam_state(std::span<const ad::Tensor> params) {
    AdamState s;
    for (const ad::Tensor& p : params) {
        s.m.emplace_back(p.numel(), 0.0);
        s.v.emplace_back(p.numel(), 0.0);
    }
    return s;
}

void adam_step(std::span<ad::Tensor> params, AdamState& state, double lr) {
    if (state.m.size() != params.size()) throw ShapeError("adam_step: state tracks a different parameter count");
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        ad::Tensor& p = params[k];
        if (state.m[k].size() != p.numel()) throw ShapeError("adam_step: moment buffer shape mismatch");
        if (!p.has_grad()) continue;
        const auto g = p.node()->grad;
        auto w = p.mutable_data();
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double clip_grad_norm(std::span<ad::Tensor> params, double max_norm) {
    double sq = 0.0;
    for (const ad::Tensor& p : params)
        for (double g : p.node()->grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (ad::Tensor& p : params)
            for (double& g : p.node()->grad) g *= f;
    }
    return norm;
}

double evaluate_nll(const ConditionalFlow& flow, const Matrix& x, const Matrix& y) {
    if (x.rows != y.rows || y.rows == 0) throw DataError("evaluate_nll: empty or misaligned rows");
    constexpr std::size_t kChunk = 2048;
    const std::size_t chunks = (y.rows + kChunk - 1) / kChunk;
    std::vector<double> sums(chunks, 0.0);
    parallel_for(chunks, [&](std::size_t begin, std::size_t end) {
        ad::NoGradGuard guard;
        for (std::size_t c = begin; c < end; ++c) {
            const std::size_t lo = c * kChunk, hi = std::min(y.rows, lo + kChunk);
            const Matrix xs = x.slice_rows(lo, hi);
            const Matrix ys = y.slice_rows(lo, hi);
            sums[c] = flow.nll(ys.data, xs.data).item() * static_cast<double>(hi - lo);
        }
    });
    return std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(y.rows);
}

FitResult fit(ConditionalFlow& flow, const Matrix& train_x, const Matrix& train_y, const Matrix& val_x,
              const Matrix& val_y, const TrainConfig& cfg) {
    if (train_y.rows == 0 || val_y.rows == 0) throw DataError("fit: training and validation sets must be nonempty");
    if (train_x.rows != train_y.rows || val_x.rows != val_y.rows) throw DataError("fit: feature/target row mismatch");
    if (!(cfg.lr0 > 0.0)) throw ConfigError("fit: lr0 must be positive");
    if (cfg.batch_size == 0) throw ConfigError("fit: batch_size must be at least 1");
    if (cfg.eval_every == 0 || cfg.decay_every == 0) throw ConfigError("fit: eval_every and decay_every must be positive");

    std::vector<ad::Tensor> params = flow.parameters();
    AdamState adam = make_adam_state(params);
    Rng rng(cfg.seed);

    std::vector<std::size_t> order(train_y.rows);
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    const std::size_t batch = std::min(cfg.batch_size, train_y.rows);
    std::size_t batch_index = 0;

    auto shuffle = [&] {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
    };

    FitResult result;
    result.best_val_nll = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best(params.size());
    std::size_t since_best = 0;
    double train_acc = 0.0;
    std::size_t train_count = 0;
    std::vector<std::size_t> idx(batch);

    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        if (cursor + batch > order.size()) shuffle();
        std::copy_n(order.begin() + cursor, batch, idx.begin());
        cursor += batch;

        for (ad::Tensor& p : params) p.zero_grad();
        const Matrix xb = train_x.gather_rows(idx);
        const Matrix yb = train_y.gather_rows(idx);
        const ad::Tensor loss = flow.nll(yb.data, xb.data);
        const double lv = loss.item();
        if (!std::isfinite(lv)) {
            std::ostringstream os;
            os << "fit: non-finite loss " << lv << " at iteration " << iter << ", batch " << batch_index;
            throw NumericError(os.str());
        }
        ad::backward(loss);
        clip_grad_norm(params, cfg.clip_norm);
        const double lr = lr_at(cfg, iter);
        adam_step(params, adam, lr);
        train_acc += lv;
        ++train_count;
        ++batch_index;
        result.iterations = iter + 1;

        if ((iter + 1) % cfg.eval_every == 0 || iter + 1 == cfg.max_iters) {
            const double val = evaluate_nll(flow, val_x, val_y);
            result.history.push_back({iter + 1, train_acc / static_cast<double>(train_count), val, lr});
            train_acc = 0.0;
            train_count = 0;
            if (val < result.best_val_nll) {
                result.best_val_nll = val;
                result.best_iter = iter + 1;
                since_best = 0;
                for (std::size_t k = 0; k < params.size(); ++k)
                    best[k].assign(params[k].data().begin(), params[k].data().end());
            } else {
                ++since_best;
            }
            if (since_best >= cfg.patience) break;
        }
    }

    if (std::isfinite(result.best_val_nll)) {
        for (std::size_t k = 0; k < params.size(); ++k)
            std::copy(best[k].begin(), best[k].end(), params[k].mutable_data().begin());
    }
    for (ad::Tensor& p : params) p.zero_grad();
    return result;
}

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& history) {
    os << "iter,train_nll,val_nll,lr\n";
    os.precision(17);
    for (const HistoryRow& h : history) os << h.iter << ',' << h.train_nll << ',' << h.val_nll << ',' << h.lr << '\n';
}

}  // namespace flowcast
