#pragma once

// Maximum-likelihood training: Adam with bias correction, step-decay learning
// rate, minibatches, validation-based snapshot selection, gradient clipping.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "flowcast/autodiff.hpp"
#include "flowcast/flow.hpp"
#include "flowcast/matrix.hpp"

namespace flowcast {

struct TrainConfig {
    double lr0 = 1e-4;
    double decay = 1.0 / 3.0;
    std::size_t decay_every = 300;
    std::size_t max_iters = 3000;
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
    std::size_t eval_every = 50;
    std::size_t patience = 10;
    double clip_norm = 10.0;  // <= 0 disables clipping
};

/// lr0 * decay^floor(iter / decay_every)
double lr_at(const TrainConfig& cfg, std::size_t iter);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

AdamState make_adam_state(std::span<const ad::Tensor> params);

/// One bias-corrected Adam update using each parameter's accumulated grad.
/// Throws ShapeError when the state does not match the parameters.
void adam_step(std::span<ad::Tensor> params, AdamState& state, double lr);

/// Rescales grads so their global L2 norm is at most max_norm; returns the norm before clipping.
double clip_grad_norm(std::span<ad::Tensor> params, double max_norm);

struct HistoryRow {
    std::size_t iter = 0;
    double train_nll = 0.0;
    double val_nll = 0.0;
    double lr = 0.0;
};

struct FitResult {
    std::vector<HistoryRow> history;
    double best_val_nll = 0.0;
    std::size_t best_iter = 0;
    std::size_t iterations = 0;
};

/// Mean NLL over all rows, evaluated in chunks without recording gradients.
double evaluate_nll(const ConditionalFlow& flow, const Matrix& x, const Matrix& y);

/// Trains in place and leaves the flow at its best-validation snapshot.
/// Throws NumericError (with iteration and batch index) on a non-finite loss.
FitResult fit(ConditionalFlow& flow, const Matrix& train_x, const Matrix& train_y, const Matrix& val_x,
              const Matrix& val_y, const TrainConfig& cfg);

/// iter,train_nll,val_nll,lr
void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& history);

}  // namespace flowcast
