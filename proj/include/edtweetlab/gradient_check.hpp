#ifndef EDTWEETLAB_GRADIENT_CHECK_HPP_
#define EDTWEETLAB_GRADIENT_CHECK_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "edtweetlab/autograd.hpp"
#include "edtweetlab/tensor.hpp"
#include "edtweetlab/util.hpp"

namespace edtweetlab {

// Builds a scalar loss from leaf variables that mirror `params` one-to-one.
using LossBuilder = std::function<ag::Var(const std::vector<ag::Var>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t entries_checked = 0;
};

// Compares tape gradients against central finite differences. Relative error
// per entry is |a - n| / max(|a|, |n|, 1e-8). When a parameter has more than
// `max_entries_per_param` entries (and the limit is nonzero), a seeded sample
// of entries is checked instead of all of them.
inline GradCheckResult gradient_check(const LossBuilder& build_loss,
                                      const std::vector<Tensor>& params, double epsilon = 1e-5,
                                      std::size_t max_entries_per_param = 0,
                                      std::uint64_t seed = 0) {
  if (epsilon < 1e-6 || epsilon > 1e-3) {
    throw InvalidArgument("gradient_check: epsilon must lie in [1e-6, 1e-3]");
  }
  std::vector<ag::Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(ag::leaf(p, true));
  ag::Var loss = build_loss(leaves);
  if (loss.value().size() != 1) throw InvalidArgument("gradient_check: loss must be scalar");
  if (!loss.value().all_finite()) throw Error("gradient_check: non-finite loss");
  ag::backward(loss);

  auto eval_loss = [&](const std::vector<Tensor>& shifted) {
    std::vector<ag::Var> frozen;
    frozen.reserve(shifted.size());
    for (const Tensor& p : shifted) frozen.push_back(ag::leaf(p, false));
    double v = build_loss(frozen).value().item();
    if (!std::isfinite(v)) throw Error("gradient_check: non-finite loss at shifted point");
    return v;
  };

  Rng rng(derive_seed(seed, "gradient-check"));
  GradCheckResult result;
  std::vector<Tensor> work = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<std::size_t> entries;
    std::size_t n = params[k].size();
    if (max_entries_per_param == 0 || n <= max_entries_per_param) {
      entries.resize(n);
      for (std::size_t i = 0; i < n; ++i) entries[i] = i;
    } else {
      entries = rng.sample_without_replacement(n, max_entries_per_param);
    }
    for (std::size_t i : entries) {
      double original = work[k][i];
      work[k][i] = original + epsilon;
      double plus = eval_loss(work);
      work[k][i] = original - epsilon;
      double minus = eval_loss(work);
      work[k][i] = original;
      double numeric = (plus - minus) / (2.0 * epsilon);
      double analytic = leaves[k].grad()[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        throw Error("gradient_check: non-finite gradient entry");
      }
      double rel = std::fabs(analytic - numeric) /
                   std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      result.max_rel_err = std::max(result.max_rel_err, rel);
      ++result.entries_checked;
    }
  }
  return result;
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_GRADIENT_CHECK_HPP_
