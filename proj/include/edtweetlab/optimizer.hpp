#ifndef EDTWEETLAB_OPTIMIZER_HPP_
#define EDTWEETLAB_OPTIMIZER_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "edtweetlab/autograd.hpp"
#include "edtweetlab/tensor.hpp"
#include "edtweetlab/util.hpp"

namespace edtweetlab {

// Plain (non-tape) mean binary cross-entropy with the same clamping as the
// tape op, for evaluation code that has probabilities in hand.
inline double bce_loss(const Tensor& pred, const Tensor& target) {
  ten::check_same_shape(pred, target, "bce_loss");
  if (pred.size() == 0) throw InvalidArgument("bce_loss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double p = std::min(std::max(pred[i], ag::kBceClamp), 1.0 - ag::kBceClamp);
    total += -(target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p));
  }
  return total / static_cast<double>(pred.size());
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static AdamState init(const std::vector<const Tensor*>& params, AdamConfig config = {}) {
    AdamState s;
    s.config = config;
    for (const Tensor* p : params) {
      s.m.emplace_back(p->rows(), p->cols());
      s.v.emplace_back(p->rows(), p->cols());
    }
    return s;
  }
};

// One Adam update with bias correction. `params`, `grads` and the state must
// line up element-wise.
inline void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                      AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw InvalidArgument("adam_step: parameter/gradient/state count mismatch");
  }
  ++state.step;
  const AdamConfig& c = state.config;
  double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    if (!p.same_shape(g) || !p.same_shape(state.m[k])) {
      throw InvalidArgument("adam_step: shape mismatch at parameter " + std::to_string(k));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      state.m[k][i] = c.beta1 * state.m[k][i] + (1.0 - c.beta1) * g[i];
      state.v[k][i] = c.beta2 * state.v[k][i] + (1.0 - c.beta2) * g[i] * g[i];
      double mhat = state.m[k][i] / bc1;
      double vhat = state.v[k][i] / bc2;
      p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_OPTIMIZER_HPP_
