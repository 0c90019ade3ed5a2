#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ncgp/fit.hpp"
#include "ncgp/mixture.hpp"
#include "ncgp/trajectory.hpp"

namespace ncgp {

/// Input/prediction horizon split; steps [0, n_in) are input, [n_in, N) prediction.
struct SplitSpec {
  int n_in = 8;
  int n_pred = 12;

  int total() const { return n_in + n_pred; }
  void validate() const;
  std::vector<int> input_steps() const;
  std::vector<int> prediction_steps() const;
};

/// Steps (0-based) whose ground-truth points are conditioned on.
struct ConditionPlan {
  std::string name;
  std::vector<int> steps;
  double obs_noise = 0.0;

  void validate(int n) const;
};

/// Conditioning on the last input point.
ConditionPlan posterior_a_plan(const SplitSpec& split, double obs_noise = 0.0);
/// Conditioning on the fourth and the last input points.
ConditionPlan posterior_b_plan(const SplitSpec& split, double obs_noise = 0.0);

/// How a synthetic trajectory deviates from its prototype path.
enum class NoiseModel {
  /// i.i.d. N(0, sigma^2) perturbations of the cubic control points, blended
  /// by the Bernstein basis and rescaled per step so every step's deviation is
  /// exactly N(0, sigma^2). Deviations are smooth along the trajectory.
  Smooth,
  /// i.i.d. N(0, sigma^2) at every step and coordinate.
  White,
};

/**
 * Synthetic multi-modal trajectories.
 *
 * Draws `prototypes` cubic Bezier mean paths with control points uniform in
 * [0, 10]^d, then `per_prototype` trajectories per path, each the prototype
 * path plus Gaussian deviations of per-step standard deviation `noise_sigma`
 * (see NoiseModel). Ids are "p<prototype>_<index>".
 */
TrajectorySet make_synthetic(int prototypes, int per_prototype, double noise_sigma,
                             std::uint64_t seed, int n, Index d,
                             NoiseModel noise_model = NoiseModel::Smooth);

/// Prototype index encoded in a synthetic trajectory id, or -1.
int prototype_of(const std::string& id);

/// Conditions `jm` on the trajectory's points at `plan.steps`.
JointMixture refine(const JointMixture& jm, const Trajectory& traj, const ConditionPlan& plan);

/// Conditions `jm` on arbitrary (step, point) observations, e.g. mid-horizon
/// measurements; gaps between steps are allowed.
JointMixture update(const JointMixture& jm, const std::vector<std::pair<int, Eigen::VectorXd>>& observations,
                    double obs_noise = 0.0);

/// Mean point of component `k` at absolute `step`; observed steps return the
/// recorded observation verbatim.
Eigen::VectorXd component_mean_at(const JointMixture& jm, std::size_t k, int step);

/// Mean Euclidean distance between the ML component's means and the truth over `eval_steps`.
double ade(const JointMixture& jm, const Trajectory& traj, const std::vector<int>& eval_steps);

/// Mean over `eval_steps` of -log sum_k pi_k N(x_step | component k marginal).
/// Every step must be latent in `jm`.
double nll_metric(const JointMixture& jm, const Trajectory& traj, const std::vector<int>& eval_steps);

struct MetricPair {
  double input = 0.0;
  double prediction = 0.0;
};

struct TrajectoryScores {
  std::string traj_id;
  std::string plan;
  MetricPair ade;
  MetricPair nll;
};

struct PlanSummary {
  std::string plan;
  MetricPair ade;
  MetricPair nll;
};

struct BenchmarkConfig {
  FitConfig fit;
  SplitSpec split;
  /// Evaluated in order after the prior.
  std::vector<ConditionPlan> plans;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  /// Worker cap for per-trajectory evaluation; 0 keeps the runtime default.
  int threads = 0;
};

struct BenchmarkReport {
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double train_loss = 0.0;
  int fit_iterations = 0;
  /// "prior" first, then one entry per plan.
  std::vector<PlanSummary> summary;
  /// Test-order, plan-minor.
  std::vector<TrajectoryScores> details;
  /// Test trajectories where the second plan's NLL exceeds the first plan's (prediction side).
  std::vector<std::string> nll_regressions_pred;
  std::vector<std::string> nll_regressions_input;
  NCurveMixture model;
  TrajectorySet train;
  TrajectorySet test;

  const PlanSummary& row(const std::string& plan) const;
};

/// Scores one test trajectory under the prior and every plan; steps a plan
/// observes are excluded from its metrics.
std::vector<TrajectoryScores> evaluate_trajectory(const JointMixture& prior, const Trajectory& traj,
                                                  const SplitSpec& split,
                                                  const std::vector<ConditionPlan>& plans);

/// Seeded 80/20 split, fit on the train part, score every test trajectory.
BenchmarkReport run_benchmark(const TrajectorySet& data, const BenchmarkConfig& cfg);

/// Deterministic shuffle-and-split used by run_benchmark.
std::pair<TrajectorySet, TrajectorySet> train_test_split(const TrajectorySet& data,
                                                         double train_fraction,
                                                         std::uint64_t seed);

void write_report_text(std::ostream& out, const BenchmarkReport& r);
std::string report_json(const BenchmarkReport& r);
void write_details_csv(std::ostream& out, const std::vector<TrajectoryScores>& rows);

}  // namespace ncgp
