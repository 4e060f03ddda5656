#pragma once

#include <cmath>
#include <stdexcept>

#include "racer/dynamics.hpp"
#include "racer/nn/tape.hpp"
#include "racer/rng.hpp"

namespace racer::nn {

/// Maps the 4-value tanh head to a 2-D squashed-Gaussian action:
/// (mu1, mu2, s1~, s2~) -> sigma = sigma_min + (s~+1)/2 * (sigma_max -
/// sigma_min), u ~ N(mu, sigma), unit action tanh(u), env action scaled to
/// [-max_steer_delta, +] x [-1, 1].
struct PolicyHeadConfig {
  double sigma_min = 1e-3;
  double sigma_max = 1.0;
  double scale[2] = {racer::Action::kMaxDeltaSteer, 1.0};
  static constexpr double kTanhEps = 1e-6;

  void validate() const {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
      throw std::invalid_argument("PolicyHeadConfig: need 0 < sigma_min < sigma_max");
  }
};

struct PolicySample {
  double action[2];  // env units
  double unit[2];    // tanh(u), in (-1, 1)
  double log_prob;   // density of the env-scaled action
};

namespace detail {
inline double half_log_2pi() { return 0.5 * std::log(2.0 * M_PI); }
}

/// CPU-side sampling (rollout workers, target actions).
inline PolicySample sample_action(const double head[4], racer::Rng& rng,
                                  bool deterministic,
                                  const PolicyHeadConfig& cfg = {}) {
  cfg.validate();
  PolicySample out;
  out.log_prob = 0.0;
  for (int k = 0; k < 2; ++k) {
    double mu = head[k];
    double sigma =
        cfg.sigma_min + 0.5 * (head[2 + k] + 1.0) * (cfg.sigma_max - cfg.sigma_min);
    double eps = deterministic ? 0.0 : rng.gaussian();
    double u = mu + sigma * eps;
    double a = std::tanh(u);
    out.unit[k] = a;
    out.action[k] = a * cfg.scale[k];
    out.log_prob += -std::log(sigma) - detail::half_log_2pi() -
                    0.5 * eps * eps -
                    std::log(1.0 - a * a + PolicyHeadConfig::kTanhEps) -
                    std::log(cfg.scale[k]);
  }
  return out;
}

/// Density of a given env-scaled action under the head (for tests and
/// diagnostics); action components must be strictly inside the bounds.
inline double log_prob_of_action(const double head[4], const double action[2],
                                 const PolicyHeadConfig& cfg = {}) {
  double lp = 0.0;
  for (int k = 0; k < 2; ++k) {
    double a = action[k] / cfg.scale[k];
    if (!(a > -1.0 && a < 1.0))
      throw std::invalid_argument("log_prob_of_action: action out of bounds");
    double u = std::atanh(a);
    double mu = head[k];
    double sigma =
        cfg.sigma_min + 0.5 * (head[2 + k] + 1.0) * (cfg.sigma_max - cfg.sigma_min);
    double eps = (u - mu) / sigma;
    lp += -std::log(sigma) - detail::half_log_2pi() - 0.5 * eps * eps -
          std::log(1.0 - a * a + PolicyHeadConfig::kTanhEps) -
          std::log(cfg.scale[k]);
  }
  return lp;
}

template <typename T>
struct TapePolicy {
  int action = -1;    // [N, 2] env-scaled, differentiable
  int log_prob = -1;  // [N, 1]
};

/// Reparameterized sampling on the tape: eps is a fixed [N, 2] noise tensor,
/// head a [N, 4] node. Gradients flow through mu and sigma.
template <typename T>
TapePolicy<T> tape_sample(Tape<T>& tape, int head, const Tensor<T>& eps,
                          const PolicyHeadConfig& cfg = {}) {
  cfg.validate();
  int N = tape.value(head).dim(0);
  if (eps.rank() != 2 || eps.dim(0) != N || eps.dim(1) != 2)
    throw std::invalid_argument("tape_sample: eps must be [N, 2]");

  int mu = tape.slice_cols(head, 0, 2);
  int st = tape.slice_cols(head, 2, 4);
  T half_range = T(0.5) * static_cast<T>(cfg.sigma_max - cfg.sigma_min);
  int sigma = tape.add_scalar(tape.scale(st, half_range),
                              static_cast<T>(cfg.sigma_min) + half_range);

  int eps_node = tape.input(eps, false);
  int u = tape.add(mu, tape.mul(sigma, eps_node));
  int unit = tape.tanh_(u);

  // env scaling: elementwise product with a constant [N, 2] scale tensor
  Tensor<T> scales({N, 2});
  for (int n = 0; n < N; ++n) {
    scales[n * 2] = static_cast<T>(cfg.scale[0]);
    scales[n * 2 + 1] = static_cast<T>(cfg.scale[1]);
  }
  int action = tape.mul(unit, tape.input(scales, false));

  // log prob: -log sigma - log(1 - unit^2 + eps_c) per dim, plus the constant
  // -0.5 eps^2 - 0.5 log 2pi - log scale terms
  int neg_log_sigma = tape.scale(tape.log_(sigma), T(-1));
  int one_minus_a2 = tape.add_scalar(
      tape.scale(tape.square(unit), T(-1)),
      T(1) + static_cast<T>(PolicyHeadConfig::kTanhEps));
  int jac = tape.scale(tape.log_(one_minus_a2), T(-1));
  Tensor<T> consts({N, 2});
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < 2; ++k)
      consts[n * 2 + k] = static_cast<T>(
          -0.5 * eps[n * 2 + k] * eps[n * 2 + k] - detail::half_log_2pi() -
          std::log(cfg.scale[k]));
  int lp_terms =
      tape.add(tape.add(neg_log_sigma, jac), tape.input(consts, false));

  TapePolicy<T> out;
  out.action = action;
  out.log_prob = tape.sum_rows(lp_terms);
  return out;
}

}  // namespace racer::nn
