#include "ncgp/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ncgp/errors.hpp"

namespace ncgp {

namespace {

constexpr double kSimplexTolerance = 1e-9;
constexpr double kWeightFloor = 1e-12;
constexpr const char* kModelVersion = "ncgp-1";

void check_simplex(const std::vector<double>& w, const char* what) {
  if (w.empty()) throw InvalidCount(std::string(what) + ": no components");
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw InvalidArgument(std::string(what) + ": weights must be finite and >= 0");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw InvalidArgument(std::string(what) + ": weights sum to " + std::to_string(sum));
  }
}

}  // namespace

NCurveMixture::NCurveMixture(std::vector<double> weights, std::vector<NCurve> curves)
    : weights_(std::move(weights)), curves_(std::move(curves)) {
  if (weights_.size() != curves_.size()) {
    throw DimensionError("mixture has " + std::to_string(weights_.size()) + " weights for " +
                         std::to_string(curves_.size()) + " curves");
  }
  check_simplex(weights_, "NCurveMixture");
  for (const auto& c : curves_) {
    if (c.degree() != curves_.front().degree() || c.dim() != curves_.front().dim()) {
      throw DimensionError("mixture curves must share degree and dimension");
    }
  }
}

std::optional<std::size_t> JointMixture::position_of(int step) const {
  auto it = std::lower_bound(steps.begin(), steps.end(), step);
  if (it == steps.end() || *it != step) return std::nullopt;
  return static_cast<std::size_t>(it - steps.begin());
}

const Eigen::VectorXd* JointMixture::observation_at(int step) const {
  for (const auto& [s, v] : observed) {
    if (s == step) return &v;
  }
  return nullptr;
}

void JointMixture::validate() const {
  if (weights.size() != components.size()) {
    throw DimensionError("JointMixture: weight and component counts differ");
  }
  check_simplex(weights, "JointMixture");
  for (const auto& c : components) {
    if (c.d != d() || c.grid.values() != grid().values()) {
      throw InvalidArgument("JointMixture: components must share grid and dimension");
    }
  }
  if (steps.size() != grid().size()) {
    throw DimensionError("JointMixture: step map does not match grid");
  }
}

Eigen::VectorXd MixtureMarginal::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(components.front().dim());
  for (std::size_t k = 0; k < components.size(); ++k) m += weights[k] * components[k].mean();
  return m;
}

JointMixture mixture_prior(const NCurveMixture& m, const TimeGrid& grid) {
  JointMixture jm;
  jm.weights = m.weights();
  jm.components.reserve(m.size());
  for (const auto& c : m.curves()) jm.components.push_back(gram(NCurveKernel{c}, grid, c.dim()));
  jm.steps.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) jm.steps[i] = static_cast<int>(i);
  return jm;
}

JointMixture mixture_condition(const JointMixture& jm, const IndexPartition& part,
                               const Eigen::VectorXd& obs, double obs_noise) {
  jm.validate();
  const Index d = jm.d();
  const Index m = static_cast<Index>(jm.grid().size()) * d;
  part.validate(m);
  if (obs.size() != static_cast<Index>(part.observed.size())) {
    throw DimensionError("mixture_condition: observation count does not match observed block");
  }
  if (part.observed.empty()) return jm;

  // Observed block must cover whole steps.
  std::vector<int> obs_positions;
  for (std::size_t i = 0; i < part.observed.size(); i += static_cast<std::size_t>(d)) {
    const Index first = part.observed[i];
    if (first % d != 0 || i + static_cast<std::size_t>(d) > part.observed.size()) {
      throw InvalidArgument("mixture_condition: observed block must consist of whole steps");
    }
    for (Index k = 1; k < d; ++k) {
      if (part.observed[i + static_cast<std::size_t>(k)] != first + k) {
        throw InvalidArgument("mixture_condition: observed block must consist of whole steps");
      }
    }
    obs_positions.push_back(static_cast<int>(first / d));
  }
  std::vector<int> latent_positions;
  for (std::size_t i = 0; i < part.latent.size(); i += static_cast<std::size_t>(d)) {
    latent_positions.push_back(static_cast<int>(part.latent[i] / d));
  }

  const std::size_t k_count = jm.size();
  std::vector<GaussianDist> posts(k_count);
  std::vector<double> log_w(k_count, -std::numeric_limits<double>::infinity());
  std::vector<std::exception_ptr> errors(k_count);
  const auto kk = static_cast<std::ptrdiff_t>(k_count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < kk; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    try {
      const GaussianDist& g = jm.components[uk].dist;
      posts[uk] = condition(g, part, obs, obs_noise);
      if (jm.weights[uk] > 0.0) {
        log_w[uk] = std::log(jm.weights[uk]) + observed_marginal_logpdf(g, part, obs, obs_noise);
      }
    } catch (...) {
      errors[uk] = std::current_exception();
    }
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const NonPSDCovariance& e) {
      throw NonPSDCovariance("component " + std::to_string(k) + ": " + e.what());
    }
  }

  const double norm = log_sum_exp(log_w);
  if (!std::isfinite(norm)) {
    throw NonPSDCovariance("mixture_condition: observation has zero likelihood under every component");
  }
  std::vector<double> w(k_count);
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    w[k] = std::exp(log_w[k] - norm);
    if (w[k] < kWeightFloor) w[k] = 0.0;
    total += w[k];
  }
  for (double& x : w) x /= total;

  JointMixture out;
  out.weights = std::move(w);
  const TimeGrid latent_grid =
      latent_positions.empty() ? TimeGrid() : jm.grid().subset(latent_positions);
  out.components.reserve(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    out.components.push_back(JointGaussian{latent_grid, std::move(posts[k]), d});
  }
  for (int p : latent_positions) out.steps.push_back(jm.steps[static_cast<std::size_t>(p)]);
  out.observed = jm.observed;
  for (std::size_t i = 0; i < obs_positions.size(); ++i) {
    out.observed.emplace_back(jm.steps[static_cast<std::size_t>(obs_positions[i])],
                              obs.segment(static_cast<Index>(i) * d, d));
  }
  std::sort(out.observed.begin(), out.observed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

MixtureMarginal mixture_marginal(const JointMixture& jm, int step) {
  const auto pos = jm.position_of(step);
  if (!pos) throw IndexOutOfRange("step " + std::to_string(step) + " is not a latent step");
  MixtureMarginal out;
  out.weights = jm.weights;
  out.components.reserve(jm.size());
  for (const auto& c : jm.components) out.components.push_back(c.step_marginal(*pos));
  return out;
}

double mixture_log_likelihood(const JointMixture& jm, const Eigen::VectorXd& seq) {
  std::vector<double> terms(jm.size());
  for (std::size_t k = 0; k < jm.size(); ++k) {
    if (seq.size() != jm.components[k].dist.dim()) {
      throw DimensionError("mixture_log_likelihood: sequence has length " +
                           std::to_string(seq.size()) + ", expected " +
                           std::to_string(jm.components[k].dist.dim()));
    }
    terms[k] = jm.weights[k] > 0.0
                   ? std::log(jm.weights[k]) + log_pdf(jm.components[k].dist, seq)
                   : -std::numeric_limits<double>::infinity();
  }
  return log_sum_exp(terms);
}

std::size_t ml_component(const JointMixture& jm) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < jm.weights.size(); ++k) {
    if (jm.weights[k] > jm.weights[best]) best = k;
  }
  return best;
}

std::string to_model_json(const NCurveMixture& m) {
  using nlohmann::json;
  json curves = json::array();
  for (const auto& c : m.curves()) {
    json points = json::array();
    for (const auto& p : c.control_points()) {
      json cov = json::array();
      for (Index r = 0; r < p.dim(); ++r) {
        json row = json::array();
        for (Index col = 0; col < p.dim(); ++col) row.push_back(p.cov()(r, col));
        cov.push_back(std::move(row));
      }
      json mean = json::array();
      for (Index r = 0; r < p.dim(); ++r) mean.push_back(p.mean()(r));
      points.push_back({{"mean", std::move(mean)}, {"cov", std::move(cov)}});
    }
    curves.push_back(std::move(points));
  }
  json doc = {{"version", kModelVersion},
              {"d", m.dim()},
              {"L", m.degree()},
              {"K", m.size()},
              {"weights", m.weights()},
              {"curves", std::move(curves)}};
  return doc.dump(2) + "\n";
}

NCurveMixture parse_model_json(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model json: ") + e.what(), 0);
  }
  try {
    if (doc.at("version").get<std::string>() != kModelVersion) {
      throw ParseError("model json: unsupported version " + doc.at("version").dump(), 0);
    }
    const auto d = doc.at("d").get<Index>();
    const auto degree = doc.at("L").get<int>();
    const auto k = doc.at("K").get<std::size_t>();
    auto weights = doc.at("weights").get<std::vector<double>>();
    const auto& curves_json = doc.at("curves");
    if (weights.size() != k || curves_json.size() != k) {
      throw ParseError("model json: K does not match weights/curves", 0);
    }
    std::vector<NCurve> curves;
    for (const auto& cj : curves_json) {
      if (cj.size() != static_cast<std::size_t>(degree + 1)) {
        throw ParseError("model json: curve has " + std::to_string(cj.size()) +
                             " control points, expected L+1",
                         0);
      }
      std::vector<GaussianDist> pts;
      for (const auto& pj : cj) {
        const auto mean_v = pj.at("mean").get<std::vector<double>>();
        const auto cov_v = pj.at("cov").get<std::vector<std::vector<double>>>();
        if (static_cast<Index>(mean_v.size()) != d || static_cast<Index>(cov_v.size()) != d) {
          throw ParseError("model json: control point dimension does not match d", 0);
        }
        Eigen::VectorXd mean(d);
        Eigen::MatrixXd cov(d, d);
        for (Index r = 0; r < d; ++r) {
          mean(r) = mean_v[static_cast<std::size_t>(r)];
          if (static_cast<Index>(cov_v[static_cast<std::size_t>(r)].size()) != d) {
            throw ParseError("model json: covariance row has wrong length", 0);
          }
          for (Index c = 0; c < d; ++c) {
            cov(r, c) = cov_v[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
          }
        }
        pts.emplace_back(std::move(mean), std::move(cov));
      }
      curves.emplace_back(std::move(pts));
    }
    return NCurveMixture(std::move(weights), std::move(curves));
  } catch (const json::exception& e) {
    throw ParseError(std::string("model json: ") + e.what(), 0);
  }
}

NCurveMixture load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_json(ss.str());
}

void save_model(const NCurveMixture& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  out << to_model_json(m);
  if (!out) throw IoError("failed writing model file '" + path + "'");
}

}  // namespace ncgp
