#include "tsseg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsseg {

Matrix row_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto in = logits.row(i);
    auto o = out.row(i);
    const Real mx = *std::max_element(in.begin(), in.end());
    Real sum = 0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (auto& x : o) x /= sum;
  }
  return out;
}

Matrix row_log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto in = logits.row(i);
    auto o = out.row(i);
    const Real mx = *std::max_element(in.begin(), in.end());
    Real sum = 0;
    for (Real z : in) sum += std::exp(z - mx);
    const Real lse = mx + std::log(sum);
    for (std::size_t j = 0; j < in.size(); ++j) o[j] = in[j] - lse;
  }
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (auto& v : y.values()) v = std::max(v, Real(0));
  return y;
}

Matrix relu_backward(const Matrix& grad, const Matrix& pre) {
  if (!grad.same_shape(pre)) throw ShapeError("relu_backward: " + grad.shape() + " vs " + pre.shape());
  Matrix g = grad;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(pre[i] > 0)) g[i] = 0;
  return g;
}

Matrix log_softmax_backward(const Matrix& grad_log_probs, const Matrix& log_probs) {
  if (!grad_log_probs.same_shape(log_probs))
    throw ShapeError("log_softmax_backward: " + grad_log_probs.shape() + " vs " + log_probs.shape());
  Matrix out(log_probs.rows(), log_probs.cols());
  for (std::size_t i = 0; i < log_probs.rows(); ++i) {
    auto g = grad_log_probs.row(i);
    Real gsum = 0;
    for (Real x : g) gsum += x;
    auto lp = log_probs.row(i);
    auto o = out.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) o[j] = g[j] - std::exp(lp[j]) * gsum;
  }
  return out;
}

Matrix softmax_backward(const Matrix& grad_probs, const Matrix& probs) {
  if (!grad_probs.same_shape(probs))
    throw ShapeError("softmax_backward: " + grad_probs.shape() + " vs " + probs.shape());
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto g = grad_probs.row(i);
    auto p = probs.row(i);
    Real dot = 0;
    for (std::size_t j = 0; j < g.size(); ++j) dot += g[j] * p[j];
    auto o = out.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) o[j] = p[j] * (g[j] - dot);
  }
  return out;
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state) {
  if (!param.same_shape(grad) || !param.same_shape(state.m) || !param.same_shape(state.v))
    throw ShapeError("adam_step: param " + param.shape() + ", grad " + grad.shape() + ", moments " +
                     state.m.shape());
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = static_cast<double>(grad[i]) + state.weight_decay * static_cast<double>(param[i]);
    const double m = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    const double v = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    state.m[i] = static_cast<Real>(m);
    state.v[i] = static_cast<Real>(v);
    const double update = state.lr * (m / c1) / (std::sqrt(v / c2) + state.eps_hat);
    param[i] = static_cast<Real>(param[i] - update);
  }
  require_finite(param, "adam_step");
}

Matrix finite_diff_grad(const ScalarFn& f, const Matrix& x, double h) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real orig = probe[i];
    probe[i] = static_cast<Real>(orig + h);
    const double up = f(probe);
    probe[i] = static_cast<Real>(orig - h);
    const double down = f(probe);
    probe[i] = orig;
    g[i] = static_cast<Real>((up - down) / (2.0 * h));
  }
  return g;
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  if (!analytic.same_shape(numeric))
    throw ShapeError("relative_error: " + analytic.shape() + " vs " + numeric.shape());
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = static_cast<double>(analytic[i]) - static_cast<double>(numeric[i]);
    diff += d * d;
    na += static_cast<double>(analytic[i]) * analytic[i];
    nn += static_cast<double>(numeric[i]) * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
}

std::vector<int> row_argmax(const Matrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j)
      if (r[j] > r[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace tsseg
