#pragma once

#include <cstdint>
#include <vector>

#include "ncgp/bezier.hpp"
#include "ncgp/mixture.hpp"
#include "ncgp/trajectory.hpp"

namespace ncgp {

struct FitConfig {
  int K = 3;
  int L = 5;
  int max_iters = 200;
  /// Initial step of the log-variance gradient descent (per M-step, with backtracking).
  double step_size = 0.5;
  std::uint64_t seed = 0;
  double min_variance = 1e-6;
  int restarts = 1;
  /// Gradient iterations on the log-variances inside each M-step.
  int variance_iters = 25;

  void validate() const;
};

struct FitResult {
  NCurveMixture model;
  /// Loss after initialization followed by the loss after every EM iteration.
  std::vector<double> loss_trace;
  int iterations = 0;
  bool converged = false;
  int best_restart = 0;

  double final_loss() const { return loss_trace.back(); }
};

/**
 * Mean negative log-likelihood of `data` under `m`, where each trajectory is
 * scored with the per-step curve-point marginals N(mu_P(t_i), Sigma_P(t_i))
 * rather than the joint:
 *
 *   (1/M) sum_j -log sum_k exp(log pi_k + sum_i log N(x_i^j | mu_k(t_i), Sigma_k(t_i)))
 */
double nll_loss(const NCurveMixture& m, const TrajectorySet& data, const TimeGrid& grid);

/**
 * Fits a K-component N-Curve mixture by EM on nll_loss.
 *
 * Initialization runs k-means++ on the flattened trajectories (taken in a
 * canonical sorted order, so the result does not depend on input order).
 * Each iteration: responsibilities; weights as mean responsibilities;
 * control means by precision- and responsibility-weighted least squares
 * against the Bernstein design; diagonal control variances by projected,
 * backtracking gradient descent on their log, floored at min_variance.
 * Stops when the loss improves by less than 1e-7 or after max_iters.
 * Returns the best of `restarts` runs. Throws DegenerateData when fewer than
 * K distinct trajectories exist and K > 1.
 */
FitResult fit_mixture_detailed(const TrajectorySet& data, const FitConfig& cfg);

inline NCurveMixture fit_mixture(const TrajectorySet& data, const FitConfig& cfg) {
  return fit_mixture_detailed(data, cfg).model;
}

/// Source of N-GP priors for an input sequence. A learned, input-conditional
/// generator would implement this; the reference one ignores its input.
class PriorGenerator {
 public:
  virtual ~PriorGenerator() = default;
  virtual JointMixture prior_for(const Trajectory& input, const TimeGrid& grid) const = 0;
};

/// Emits the same fitted mixture's prior for every input.
class FixedMixturePrior final : public PriorGenerator {
 public:
  explicit FixedMixturePrior(NCurveMixture model) : model_(std::move(model)) {}
  JointMixture prior_for(const Trajectory& input, const TimeGrid& grid) const override;
  const NCurveMixture& model() const { return model_; }

 private:
  NCurveMixture model_;
};

JointMixture predict_prior(const NCurveMixture& m, const TimeGrid& grid);

}  // namespace ncgp
