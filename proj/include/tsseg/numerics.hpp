#pragma once

#include <cstdint>
#include <functional>

#include "tsseg/kernels.hpp"
#include "tsseg/matrix.hpp"

namespace tsseg {

/// Standard matrix product (parallel kernel). Throws ShapeError naming both
/// shapes when a.cols() != b.rows().
inline Matrix matmul(const Matrix& a, const Matrix& b) { return kernels::matmul(a, b); }

/// Row-wise softmax with max subtraction.
Matrix row_softmax(const Matrix& logits);

/// Row-wise log-softmax computed as logit - logsumexp, never log(softmax).
Matrix row_log_softmax(const Matrix& logits);

Matrix relu(const Matrix& x);

/// grad * 1[pre > 0], the ReLU backward pass.
Matrix relu_backward(const Matrix& grad, const Matrix& pre);

/// Maps a gradient with respect to log-softmax outputs onto the logits:
/// dL/dz = g - p * rowsum(g), where p = exp(log_probs).
Matrix log_softmax_backward(const Matrix& grad_log_probs, const Matrix& log_probs);

/// Maps a gradient with respect to softmax outputs onto the logits.
Matrix softmax_backward(const Matrix& grad_probs, const Matrix& probs);

/// Hyperparameters of one ADAM-optimized parameter.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  double weight_decay = 0.0;
};

/// First/second moment buffers for one parameter matrix.
struct AdamState {
  Matrix m;
  Matrix v;
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  double weight_decay = 0.0;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, const AdamConfig& cfg = {})
      : m(rows, cols), v(rows, cols) {
    configure(cfg);
  }
  void configure(const AdamConfig& cfg) {
    lr = cfg.lr;
    beta1 = cfg.beta1;
    beta2 = cfg.beta2;
    eps_hat = cfg.eps_hat;
    weight_decay = cfg.weight_decay;
  }
  void reset() {
    m.fill(0);
    v.fill(0);
    step_count = 0;
  }
};

/// One bias-corrected ADAM update. Weight decay is classic L2: it is added to
/// the gradient before the moment updates.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state);

using ScalarFn = std::function<double(const Matrix&)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry.
Matrix finite_diff_grad(const ScalarFn& f, const Matrix& x, double h = 1e-5);

/// ||a - b|| / max(||a||, ||b||, 1e-8) in the Frobenius norm: the relative
/// error used by the gradient checks.
double relative_error(const Matrix& analytic, const Matrix& numeric);

/// Argmax per row, ties toward the lowest column.
std::vector<int> row_argmax(const Matrix& m);

}  // namespace tsseg
