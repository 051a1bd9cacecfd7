#pragma once

#include <algorithm>
#include <cmath>

#include "emde/common.hpp"
#include "emde/model.hpp"

namespace testing {

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

// Random batch: non-negative sparse-ish inputs, L1-able targets with a few
// empty depth slices.
inline void random_batch(std::size_t rows, const emde::ModelSpec& spec, emde::Rng& rng, emde::Matrix& x,
                         emde::Matrix& y) {
  x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec.input_size));
  y.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec.output_size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.uniform() < 0.5 ? 0.0 : rng.uniform() * 3;
}

// Central differences against loss_and_gradients for every trainable scalar.
inline GradCheck finite_difference_check(emde::ModelParams params, const emde::Matrix& x, const emde::Matrix& y,
                                         emde::Mode mode, double h = 1e-5) {
  GradCheck out;
  emde::ModelParams scratch = params;
  const auto analytic = emde::loss_and_gradients(scratch, x, y, mode).grads;
  auto tensors = params.trainable();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (std::size_t i = 0; i < tensors[t].size(); ++i) {
      const double orig = tensors[t][i];
      tensors[t][i] = orig + h;
      scratch = params;
      const double up = emde::loss_and_gradients(scratch, x, y, mode).loss;
      tensors[t][i] = orig - h;
      scratch = params;
      const double down = emde::loss_and_gradients(scratch, x, y, mode).loss;
      tensors[t][i] = orig;
      const double fd = (up - down) / (2 * h);
      const double a = analytic[t][i];
      const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      out.max_rel_err = std::max(out.max_rel_err, err);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace testing
