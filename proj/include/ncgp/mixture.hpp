#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ncgp/bezier.hpp"
#include "ncgp/gaussian.hpp"
#include "ncgp/ngp.hpp"

namespace ncgp {

/// Weighted mixture of N-Curves sharing degree and dimension.
class NCurveMixture {
 public:
  NCurveMixture() = default;
  NCurveMixture(std::vector<double> weights, std::vector<NCurve> curves);

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<NCurve>& curves() const { return curves_; }
  std::size_t size() const { return curves_.size(); }
  int degree() const { return curves_.front().degree(); }
  Index dim() const { return curves_.front().dim(); }

 private:
  std::vector<double> weights_;
  std::vector<NCurve> curves_;
};

/**
 * Mixture of joint Gaussians over a shared set of time steps.
 *
 * `steps` maps each grid position back to its absolute sequence index. After
 * conditioning, the observed steps are removed from the grid and recorded in
 * `observed` with their values verbatim.
 */
struct JointMixture {
  std::vector<double> weights;
  std::vector<JointGaussian> components;
  std::vector<int> steps;
  std::vector<std::pair<int, Eigen::VectorXd>> observed;

  std::size_t size() const { return components.size(); }
  Index d() const { return components.front().d; }
  const TimeGrid& grid() const { return components.front().grid; }

  /// Grid position of absolute step `step`, if it is latent.
  std::optional<std::size_t> position_of(int step) const;
  /// Recorded observation at absolute step `step`, if any.
  const Eigen::VectorXd* observation_at(int step) const;

  /// Throws InvalidArgument unless weights form a simplex and components share grid and d.
  void validate() const;
};

struct MixtureMarginal {
  std::vector<double> weights;
  std::vector<GaussianDist> components;

  Eigen::VectorXd mean() const;
};

/// Prior over `grid`: one N-GP per curve, weights copied. Steps are 0..N-1.
JointMixture mixture_prior(const NCurveMixture& m, const TimeGrid& grid);

/**
 * Conditions every component on the observed block and reweights by the
 * observed-block evidence, pi_k' ~ pi_k N(obs | component k). The observed
 * block must consist of whole time steps. Posterior weights below 1e-12 are
 * clamped to zero and the rest renormalized.
 */
JointMixture mixture_condition(const JointMixture& jm, const IndexPartition& part,
                               const Eigen::VectorXd& obs, double obs_noise = 0.0);

/// Per-component marginal at absolute step `step`; IndexOutOfRange if not latent.
MixtureMarginal mixture_marginal(const JointMixture& jm, int step);

/// log sum_k pi_k N(seq | component k) over the full latent vector.
double mixture_log_likelihood(const JointMixture& jm, const Eigen::VectorXd& seq);

/// Index of the largest weight; ties go to the lowest index.
std::size_t ml_component(const JointMixture& jm);

/// Serialized form, versioned "ncgp-1".
std::string to_model_json(const NCurveMixture& m);
NCurveMixture parse_model_json(std::string_view text);

NCurveMixture load_model(const std::string& path);
void save_model(const NCurveMixture& m, const std::string& path);

}  // namespace ncgp
