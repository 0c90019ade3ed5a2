#include "ncgp/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/QR>

#include "ncgp/errors.hpp"

namespace ncgp {

namespace {

constexpr double kConvergenceTolerance = 1e-7;
constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 40;
constexpr int kKMeansIters = 100;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Diagonal-covariance parameters of one component: rows are control points, columns dimensions.
struct Component {
  Eigen::MatrixXd means;
  Eigen::MatrixXd variances;
};

struct Params {
  std::vector<double> weights;
  std::vector<Component> comps;
};

// Dataset in canonical order with the Bernstein design precomputed.
struct Problem {
  std::vector<Eigen::MatrixXd> x;  // each N x d
  Eigen::MatrixXd basis;           // N x (L+1)
  Eigen::MatrixXd basis_sq;
  Index n = 0;
  Index d = 0;
  int degree = 0;
  double min_variance = 1e-6;
};

Problem make_problem(const TrajectorySet& data, const FitConfig& cfg) {
  Problem p;
  p.n = data.front().length();
  p.d = data.front().dim();
  p.degree = cfg.L;
  p.min_variance = cfg.min_variance;
  std::vector<const Trajectory*> order;
  order.reserve(data.size());
  for (const auto& t : data) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const Trajectory* a, const Trajectory* b) {
    const auto* pa = a->points.data();
    const auto* pb = b->points.data();
    const auto size = a->points.size();
    if (std::lexicographical_compare(pa, pa + size, pb, pb + size)) return true;
    if (std::lexicographical_compare(pb, pb + size, pa, pa + size)) return false;
    return a->id < b->id;
  });
  p.x.reserve(order.size());
  for (const auto* t : order) p.x.push_back(t->points);

  const TimeGrid grid = TimeGrid::uniform(static_cast<int>(p.n));
  p.basis.resize(p.n, cfg.L + 1);
  for (Index i = 0; i < p.n; ++i) {
    p.basis.row(i) = bernstein_all(cfg.L, grid[static_cast<std::size_t>(i)]).transpose();
  }
  p.basis_sq = p.basis.array().square();
  return p;
}

std::size_t count_distinct(const Problem& p) {
  std::size_t distinct = p.x.empty() ? 0 : 1;
  for (std::size_t j = 1; j < p.x.size(); ++j) {
    if (p.x[j] != p.x[j - 1]) ++distinct;  // canonical order groups duplicates
  }
  return distinct;
}

// Per-trajectory log-likelihood under each component; returns the mean NLL.
double e_step(const Problem& p, const Params& params, Eigen::MatrixXd& resp) {
  const std::size_t k_count = params.comps.size();
  std::vector<Eigen::MatrixXd> mean(k_count), var(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    mean[k] = p.basis * params.comps[k].means;
    var[k] = p.basis_sq * params.comps[k].variances;
  }
  std::vector<double> log_w(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    log_w[k] = params.weights[k] > 0.0 ? std::log(params.weights[k])
                                       : -std::numeric_limits<double>::infinity();
  }

  const auto m = static_cast<std::ptrdiff_t>(p.x.size());
  resp.resize(m, static_cast<Index>(k_count));
  std::vector<double> per_traj(static_cast<std::size_t>(m));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < m; ++j) {
    std::vector<double> terms(k_count);
    const auto& x = p.x[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < k_count; ++k) {
      if (!std::isfinite(log_w[k])) {
        terms[k] = log_w[k];
        continue;
      }
      const auto s = var[k].array();
      const auto r2 = (x - mean[k]).array().square();
      terms[k] = log_w[k] - 0.5 * ((s.log() + kLog2Pi) + r2 / s).sum();
    }
    const double lse = log_sum_exp(terms);
    for (std::size_t k = 0; k < k_count; ++k) {
      resp(j, static_cast<Index>(k)) = std::exp(terms[k] - lse);
    }
    per_traj[static_cast<std::size_t>(j)] = -lse;
  }
  // Fixed-order reduction keeps the loss independent of the thread count.
  return std::accumulate(per_traj.begin(), per_traj.end(), 0.0) / static_cast<double>(m);
}

// Weighted least squares of ybar (N) on the Bernstein design with per-step weights.
Eigen::VectorXd weighted_ls(const Problem& p, const Eigen::VectorXd& ybar,
                            const Eigen::VectorXd& weights) {
  const Eigen::VectorXd sw = weights.cwiseSqrt();
  const Eigen::MatrixXd a = sw.asDiagonal() * p.basis;
  const Eigen::VectorXd b = sw.cwiseProduct(ybar);
  return Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(a).solve(b);
}

// Objective in the log-variances for one component and dimension, per unit responsibility.
struct VarianceObjective {
  const Problem& p;
  Eigen::VectorXd resid_sq;  // E_i / R

  double value(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd s = p.basis_sq * theta.array().exp().matrix();
    return 0.5 * (s.array().log() + resid_sq.array() / s.array()).sum();
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd v = theta.array().exp();
    const Eigen::ArrayXd s = (p.basis_sq * v).array();
    const Eigen::VectorXd inner = (1.0 / s - resid_sq.array() / s.square()).matrix();
    return 0.5 * v.cwiseProduct(p.basis_sq.transpose() * inner);
  }
};

Eigen::VectorXd descend_log_variances(const VarianceObjective& obj, Eigen::VectorXd theta,
                                      const FitConfig& cfg) {
  const double floor = std::log(cfg.min_variance);
  theta = theta.cwiseMax(floor);
  double f = obj.value(theta);
  double step = cfg.step_size;
  for (int it = 0; it < cfg.variance_iters; ++it) {
    const Eigen::VectorXd g = obj.gradient(theta);
    bool accepted = false;
    for (int h = 0; h < kMaxHalvings; ++h) {
      const Eigen::VectorXd cand = (theta - step * g).cwiseMax(floor);
      const double decrease = g.dot(theta - cand);
      if (decrease <= 0.0) break;
      const double fc = obj.value(cand);
      if (fc <= f - kArmijo * decrease) {
        theta = cand;
        f = fc;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    step = std::min(step * 2.0, 64.0 * cfg.step_size);
  }
  return theta;
}

void m_step(const Problem& p, const Eigen::MatrixXd& resp, Params& params, const FitConfig& cfg) {
  const auto m = static_cast<Index>(p.x.size());
  for (std::size_t k = 0; k < params.comps.size(); ++k) {
    const Eigen::VectorXd r = resp.col(static_cast<Index>(k));
    const double total = r.sum();
    params.weights[k] = total / static_cast<double>(m);
    if (!(total > std::numeric_limits<double>::min())) {
      params.weights[k] = 0.0;
      continue;
    }
    Component& comp = params.comps[k];
    Eigen::MatrixXd ybar = Eigen::MatrixXd::Zero(p.n, p.d);
    for (Index j = 0; j < m; ++j) ybar += r(j) * p.x[static_cast<std::size_t>(j)];
    ybar /= total;

    const Eigen::MatrixXd step_var = p.basis_sq * comp.variances;
    for (Index dim = 0; dim < p.d; ++dim) {
      const Eigen::VectorXd precision = step_var.col(dim).cwiseInverse();
      comp.means.col(dim) = weighted_ls(p, ybar.col(dim), precision);
    }

    const Eigen::MatrixXd fitted = p.basis * comp.means;
    Eigen::MatrixXd resid_sq = Eigen::MatrixXd::Zero(p.n, p.d);
    for (Index j = 0; j < m; ++j) {
      resid_sq += r(j) * (p.x[static_cast<std::size_t>(j)] - fitted).array().square().matrix();
    }
    resid_sq /= total;
    for (Index dim = 0; dim < p.d; ++dim) {
      VarianceObjective obj{p, resid_sq.col(dim)};
      const Eigen::VectorXd theta = comp.variances.col(dim).array().log();
      comp.variances.col(dim) =
          descend_log_variances(obj, theta, cfg).array().exp().cwiseMax(cfg.min_variance);
    }
  }
  const double sum = std::accumulate(params.weights.begin(), params.weights.end(), 0.0);
  for (double& w : params.weights) w /= sum;
}

std::vector<int> kmeans(const Problem& p, int k_count, std::mt19937_64& rng) {
  const std::size_t m = p.x.size();
  auto dist2 = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).squaredNorm();
  };
  std::vector<Eigen::MatrixXd> centers;
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  centers.push_back(p.x[pick(rng)]);
  std::vector<double> d2(m);
  while (static_cast<int>(centers.size()) < k_count) {
    for (std::size_t j = 0; j < m; ++j) {
      d2[j] = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) d2[j] = std::min(d2[j], dist2(p.x[j], c));
    }
    std::discrete_distribution<std::size_t> next(d2.begin(), d2.end());
    centers.push_back(p.x[next(rng)]);
  }

  std::vector<int> assign(m, -1);
  for (int it = 0; it < kKMeansIters; ++it) {
    bool changed = false;
    for (std::size_t j = 0; j < m; ++j) {
      int best = 0;
      double best_d = dist2(p.x[j], centers[0]);
      for (int c = 1; c < k_count; ++c) {
        const double dc = dist2(p.x[j], centers[static_cast<std::size_t>(c)]);
        if (dc < best_d) {
          best_d = dc;
          best = c;
        }
      }
      if (assign[j] != best) {
        assign[j] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < k_count; ++c) {
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p.n, p.d);
      int count = 0;
      for (std::size_t j = 0; j < m; ++j) {
        if (assign[j] == c) {
          sum += p.x[j];
          ++count;
        }
      }
      if (count > 0) centers[static_cast<std::size_t>(c)] = sum / count;
    }
  }
  return assign;
}

Params initialize(const Problem& p, const FitConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto assign = kmeans(p, cfg.K, rng);
  const double mean_basis_sq = p.basis_sq.rowwise().sum().mean();
  Params params;
  params.weights.assign(static_cast<std::size_t>(cfg.K), 0.0);
  params.comps.resize(static_cast<std::size_t>(cfg.K));
  for (int c = 0; c < cfg.K; ++c) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p.n, p.d);
    int count = 0;
    for (std::size_t j = 0; j < p.x.size(); ++j) {
      if (assign[j] == c) {
        sum += p.x[j];
        ++count;
      }
    }
    auto& comp = params.comps[static_cast<std::size_t>(c)];
    comp.means = Eigen::MatrixXd::Zero(cfg.L + 1, p.d);
    comp.variances = Eigen::MatrixXd::Constant(cfg.L + 1, p.d, cfg.min_variance);
    params.weights[static_cast<std::size_t>(c)] =
        static_cast<double>(count) / static_cast<double>(p.x.size());
    if (count == 0) continue;
    const Eigen::MatrixXd ybar = sum / count;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p.n);
    for (Index dim = 0; dim < p.d; ++dim) comp.means.col(dim) = weighted_ls(p, ybar.col(dim), ones);
    const Eigen::MatrixXd fitted = p.basis * comp.means;
    Eigen::VectorXd resid = Eigen::VectorXd::Zero(p.d);
    for (std::size_t j = 0; j < p.x.size(); ++j) {
      if (assign[j] == c) resid += (p.x[j] - fitted).array().square().colwise().sum().matrix().transpose();
    }
    resid /= static_cast<double>(count) * static_cast<double>(p.n);
    for (Index dim = 0; dim < p.d; ++dim) {
      comp.variances.col(dim).setConstant(std::max(cfg.min_variance, resid(dim) / mean_basis_sq));
    }
  }
  return params;
}

NCurveMixture to_mixture(const Params& params) {
  std::vector<NCurve> curves;
  curves.reserve(params.comps.size());
  for (const auto& comp : params.comps) {
    std::vector<GaussianDist> pts;
    for (Index l = 0; l < comp.means.rows(); ++l) {
      pts.push_back(GaussianDist::diagonal(comp.means.row(l).transpose(),
                                           comp.variances.row(l).transpose()));
    }
    curves.emplace_back(std::move(pts));
  }
  return NCurveMixture(params.weights, std::move(curves));
}

FitResult run_once(const Problem& p, const FitConfig& cfg, std::uint64_t seed) {
  Params params = initialize(p, cfg, seed);
  Eigen::MatrixXd resp;
  FitResult result;
  double loss = e_step(p, params, resp);
  result.loss_trace.push_back(loss);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    m_step(p, resp, params, cfg);
    const double next = e_step(p, params, resp);
    result.loss_trace.push_back(next);
    result.iterations = it;
    if (loss - next < kConvergenceTolerance) {
      result.converged = true;
      break;
    }
    loss = next;
  }
  result.model = to_mixture(params);
  return result;
}

}  // namespace

void FitConfig::validate() const {
  if (K < 1) throw InvalidArgument("K must be >= 1");
  if (L < 1 || L > kMaxDegree) throw InvalidArgument("L must be in [1, 60]");
  if (!(min_variance > 0.0)) throw InvalidArgument("min_variance must be > 0");
  if (max_iters < 0) throw InvalidArgument("max_iters must be >= 0");
  if (!(step_size > 0.0)) throw InvalidArgument("step_size must be > 0");
  if (restarts < 1) throw InvalidArgument("restarts must be >= 1");
  if (variance_iters < 0) throw InvalidArgument("variance_iters must be >= 0");
}

double nll_loss(const NCurveMixture& m, const TrajectorySet& data, const TimeGrid& grid) {
  check_dataset(data);
  if (static_cast<std::size_t>(data.front().length()) != grid.size()) {
    throw DimensionError("trajectories have " + std::to_string(data.front().length()) +
                         " steps, grid has " + std::to_string(grid.size()));
  }
  if (data.front().dim() != m.dim()) {
    throw DimensionError("trajectory dimension does not match the model");
  }
  const std::size_t k_count = m.size();
  std::vector<std::vector<Eigen::MatrixXd>> chol(k_count);
  std::vector<std::vector<Eigen::VectorXd>> mean(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (double t : grid.values()) {
      const GaussianDist g = curve_point(m.curves()[k], t);
      chol[k].push_back(cholesky_with_jitter(g.cov()));
      mean[k].push_back(g.mean());
    }
  }
  const Index d = m.dim();
  const double log_norm = 0.5 * static_cast<double>(d) * kLog2Pi;
  double total = 0.0;
  std::vector<double> terms(k_count);
  for (const auto& traj : data) {
    for (std::size_t k = 0; k < k_count; ++k) {
      if (!(m.weights()[k] > 0.0)) {
        terms[k] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double ll = std::log(m.weights()[k]);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& lo = chol[k][i];
        const Eigen::VectorXd z = lo.triangularView<Eigen::Lower>().solve(
            traj.point(static_cast<int>(i)) - mean[k][i]);
        ll -= log_norm + lo.diagonal().array().log().sum() + 0.5 * z.squaredNorm();
      }
      terms[k] = ll;
    }
    total -= log_sum_exp(terms);
  }
  return total / static_cast<double>(data.size());
}

FitResult fit_mixture_detailed(const TrajectorySet& data, const FitConfig& cfg) {
  cfg.validate();
  check_dataset(data);
  if (data.size() < static_cast<std::size_t>(cfg.K)) {
    throw InvalidCount("need at least K = " + std::to_string(cfg.K) + " trajectories, got " +
                       std::to_string(data.size()));
  }
  if (data.front().length() < 2) throw InvalidCount("trajectories need at least 2 steps");
  const Problem p = make_problem(data, cfg);
  if (cfg.K > 1 && count_distinct(p) < static_cast<std::size_t>(cfg.K)) {
    throw DegenerateData("only " + std::to_string(count_distinct(p)) +
                         " distinct trajectories for K = " + std::to_string(cfg.K) +
                         " components; mixture weights would collapse");
  }
  FitResult best;
  for (int r = 0; r < cfg.restarts; ++r) {
    FitResult run = run_once(p, cfg, splitmix64(cfg.seed + static_cast<std::uint64_t>(r)));
    run.best_restart = r;
    if (r == 0 || run.final_loss() < best.final_loss()) best = std::move(run);
  }
  return best;
}

JointMixture FixedMixturePrior::prior_for(const Trajectory& /*input*/, const TimeGrid& grid) const {
  return mixture_prior(model_, grid);
}

JointMixture predict_prior(const NCurveMixture& m, const TimeGrid& grid) {
  return mixture_prior(m, grid);
}

}  // namespace ncgp
