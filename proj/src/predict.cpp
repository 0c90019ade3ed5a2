#include "ncgp/predict.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ncgp/errors.hpp"
#include "ncgp/format.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ncgp {

namespace {

std::vector<int> without(const std::vector<int>& steps, const std::vector<int>& removed) {
  std::vector<int> out;
  for (int s : steps) {
    if (std::find(removed.begin(), removed.end(), s) == removed.end()) out.push_back(s);
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

JointMixture condition_on_steps(const JointMixture& jm,
                                std::vector<std::pair<int, Eigen::VectorXd>> observations,
                                double obs_noise) {
  if (observations.empty()) return jm;
  std::sort(observations.begin(), observations.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const Index d = jm.d();
  std::vector<Index> flat;
  Eigen::VectorXd values(static_cast<Index>(observations.size()) * d);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& [step, point] = observations[i];
    if (i > 0 && step == observations[i - 1].first) {
      throw InvalidArgument("step " + std::to_string(step) + " observed twice");
    }
    const auto pos = jm.position_of(step);
    if (!pos) {
      throw IndexOutOfRange("step " + std::to_string(step) +
                            " is not a latent step of the distribution");
    }
    if (point.size() != d) {
      throw DimensionError("observation at step " + std::to_string(step) + " has dimension " +
                           std::to_string(point.size()) + ", expected " + std::to_string(d));
    }
    for (Index k = 0; k < d; ++k) flat.push_back(static_cast<Index>(*pos) * d + k);
    values.segment(static_cast<Index>(i) * d, d) = point;
  }
  const auto part = IndexPartition::from_observed(std::move(flat),
                                                  static_cast<Index>(jm.grid().size()) * d);
  return mixture_condition(jm, part, values, obs_noise);
}

}  // namespace

void SplitSpec::validate() const {
  if (n_in < 1 || n_pred < 1) throw InvalidArgument("split needs n_in >= 1 and n_pred >= 1");
}

std::vector<int> SplitSpec::input_steps() const {
  std::vector<int> v(static_cast<std::size_t>(n_in));
  for (int i = 0; i < n_in; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

std::vector<int> SplitSpec::prediction_steps() const {
  std::vector<int> v(static_cast<std::size_t>(n_pred));
  for (int i = 0; i < n_pred; ++i) v[static_cast<std::size_t>(i)] = n_in + i;
  return v;
}

void ConditionPlan::validate(int n) const {
  if (!(obs_noise >= 0.0)) throw InvalidArgument("plan '" + name + "': obs_noise must be >= 0");
  std::vector<int> sorted = steps;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidArgument("plan '" + name + "' lists a step twice");
  }
  for (int s : steps) {
    if (s < 0 || s >= n) {
      throw IndexOutOfRange("plan '" + name + "': step " + std::to_string(s) + " outside [0, " +
                            std::to_string(n) + ")");
    }
  }
}

ConditionPlan posterior_a_plan(const SplitSpec& split, double obs_noise) {
  return ConditionPlan{"posteriorA", {split.n_in - 1}, obs_noise};
}

ConditionPlan posterior_b_plan(const SplitSpec& split, double obs_noise) {
  if (split.n_in < 5) throw InvalidArgument("posterior B needs n_in >= 5");
  return ConditionPlan{"posteriorB", {3, split.n_in - 1}, obs_noise};
}

TrajectorySet make_synthetic(int prototypes, int per_prototype, double noise_sigma,
                             std::uint64_t seed, int n, Index d, NoiseModel noise_model) {
  if (prototypes < 1 || per_prototype < 1) throw InvalidCount("synthetic counts must be >= 1");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  if (d < 1) throw DimensionError("d must be >= 1");
  const TimeGrid grid = TimeGrid::uniform(n);
  constexpr int kDegree = 3;
  const Eigen::MatrixXd design = construction_matrix(kDegree, 1, grid);  // n x 4
  // Row j of the smooth-noise blend has unit norm, so each step's deviation has variance sigma^2.
  const Eigen::VectorXd blend_norm = design.rowwise().norm();
  const Eigen::MatrixXd blend = blend_norm.cwiseInverse().asDiagonal() * design;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(0.0, 10.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  TrajectorySet out;
  out.reserve(static_cast<std::size_t>(prototypes) * static_cast<std::size_t>(per_prototype));
  for (int p = 0; p < prototypes; ++p) {
    Eigen::MatrixXd control(kDegree + 1, d);
    for (Index l = 0; l <= kDegree; ++l) {
      for (Index k = 0; k < d; ++k) control(l, k) = box(rng);
    }
    const Eigen::MatrixXd path = design * control;
    for (int i = 0; i < per_prototype; ++i) {
      Eigen::MatrixXd pts = path;
      if (noise_model == NoiseModel::Smooth) {
        Eigen::MatrixXd delta(kDegree + 1, d);
        for (Index l = 0; l <= kDegree; ++l) {
          for (Index k = 0; k < d; ++k) delta(l, k) = noise_sigma * noise(rng);
        }
        pts += blend * delta;
      } else {
        for (Index j = 0; j < pts.rows(); ++j) {
          for (Index k = 0; k < d; ++k) pts(j, k) += noise_sigma * noise(rng);
        }
      }
      char id[32];
      std::snprintf(id, sizeof(id), "p%d_%04d", p, i);
      out.push_back(Trajectory{id, std::move(pts)});
    }
  }
  return out;
}

int prototype_of(const std::string& id) {
  if (id.size() < 2 || id[0] != 'p') return -1;
  const auto us = id.find('_');
  if (us == std::string::npos) return -1;
  try {
    return std::stoi(id.substr(1, us - 1));
  } catch (const std::exception&) {
    return -1;
  }
}

JointMixture refine(const JointMixture& jm, const Trajectory& traj, const ConditionPlan& plan) {
  const int n = static_cast<int>(jm.steps.size() + jm.observed.size());
  plan.validate(n);
  if (traj.length() != n) {
    throw DimensionError("trajectory '" + traj.id + "' has " + std::to_string(traj.length()) +
                         " steps, distribution covers " + std::to_string(n));
  }
  std::vector<std::pair<int, Eigen::VectorXd>> obs;
  for (int s : plan.steps) obs.emplace_back(s, traj.point(s));
  return condition_on_steps(jm, std::move(obs), plan.obs_noise);
}

JointMixture update(const JointMixture& jm,
                    const std::vector<std::pair<int, Eigen::VectorXd>>& observations,
                    double obs_noise) {
  if (!(obs_noise >= 0.0)) throw InvalidArgument("obs_noise must be >= 0");
  return condition_on_steps(jm, observations, obs_noise);
}

Eigen::VectorXd component_mean_at(const JointMixture& jm, std::size_t k, int step) {
  if (const auto* v = jm.observation_at(step)) return *v;
  const auto pos = jm.position_of(step);
  if (!pos) throw IndexOutOfRange("step " + std::to_string(step) + " not covered");
  const Index d = jm.d();
  return jm.components[k].dist.mean().segment(static_cast<Index>(*pos) * d, d);
}

double ade(const JointMixture& jm, const Trajectory& traj, const std::vector<int>& eval_steps) {
  const std::size_t k = ml_component(jm);
  std::vector<double> dists;
  dists.reserve(eval_steps.size());
  for (int s : eval_steps) {
    if (s < 0 || s >= traj.length()) throw IndexOutOfRange("ade: step out of range");
    dists.push_back((component_mean_at(jm, k, s) - traj.point(s)).norm());
  }
  return mean_of(dists);
}

double nll_metric(const JointMixture& jm, const Trajectory& traj,
                  const std::vector<int>& eval_steps) {
  std::vector<double> vals;
  vals.reserve(eval_steps.size());
  std::vector<double> terms(jm.size());
  for (int s : eval_steps) {
    if (s < 0 || s >= traj.length()) throw IndexOutOfRange("nll_metric: step out of range");
    const MixtureMarginal marg = mixture_marginal(jm, s);
    const Eigen::VectorXd x = traj.point(s);
    for (std::size_t k = 0; k < jm.size(); ++k) {
      terms[k] = marg.weights[k] > 0.0
                     ? std::log(marg.weights[k]) + log_pdf(marg.components[k], x)
                     : -std::numeric_limits<double>::infinity();
    }
    vals.push_back(-log_sum_exp(terms));
  }
  return mean_of(vals);
}

const PlanSummary& BenchmarkReport::row(const std::string& plan) const {
  for (const auto& r : summary) {
    if (r.plan == plan) return r;
  }
  throw InvalidArgument("no report row for plan '" + plan + "'");
}

std::vector<TrajectoryScores> evaluate_trajectory(const JointMixture& prior, const Trajectory& traj,
                                                  const SplitSpec& split,
                                                  const std::vector<ConditionPlan>& plans) {
  const auto in_steps = split.input_steps();
  const auto pred_steps = split.prediction_steps();
  std::vector<TrajectoryScores> out;
  out.push_back(TrajectoryScores{traj.id, "prior",
                                 {ade(prior, traj, in_steps), ade(prior, traj, pred_steps)},
                                 {nll_metric(prior, traj, in_steps),
                                  nll_metric(prior, traj, pred_steps)}});
  for (const auto& plan : plans) {
    const JointMixture post = refine(prior, traj, plan);
    const auto pin = without(in_steps, plan.steps);
    const auto ppred = without(pred_steps, plan.steps);
    out.push_back(TrajectoryScores{traj.id, plan.name,
                                   {ade(post, traj, pin), ade(post, traj, ppred)},
                                   {nll_metric(post, traj, pin), nll_metric(post, traj, ppred)}});
  }
  return out;
}

std::pair<TrajectorySet, TrajectorySet> train_test_split(const TrajectorySet& data,
                                                         double train_fraction,
                                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  // Fisher-Yates with a plain modulo draw keeps the permutation independent of
  // the standard library's distribution implementation.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(data.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, data.size() - 1);
  std::pair<TrajectorySet, TrajectorySet> out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(data[idx[i]]);
  }
  return out;
}

BenchmarkReport run_benchmark(const TrajectorySet& data, const BenchmarkConfig& cfg) {
  cfg.split.validate();
  check_dataset(data);
  if (data.size() < 10) throw InvalidCount("benchmark needs at least 10 trajectories");
  if (data.front().length() != cfg.split.total()) {
    throw DimensionError("trajectories have " + std::to_string(data.front().length()) +
                         " steps, split expects " + std::to_string(cfg.split.total()));
  }
  for (const auto& p : cfg.plans) p.validate(cfg.split.total());

  BenchmarkReport report;
  std::tie(report.train, report.test) = train_test_split(data, cfg.train_fraction, cfg.seed);
  report.train_size = report.train.size();
  report.test_size = report.test.size();

  FitConfig fit_cfg = cfg.fit;
  fit_cfg.seed = cfg.seed;
  const FitResult fit = fit_mixture_detailed(report.train, fit_cfg);
  report.model = fit.model;
  report.train_loss = fit.final_loss();
  report.fit_iterations = fit.iterations;

  const TimeGrid grid = TimeGrid::uniform(cfg.split.total());
  const FixedMixturePrior generator(report.model);

  const auto m = static_cast<std::ptrdiff_t>(report.test.size());
  std::vector<std::vector<TrajectoryScores>> per(report.test.size());
  std::vector<std::exception_ptr> errors(report.test.size());
#ifdef _OPENMP
  const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (std::ptrdiff_t j = 0; j < m; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    try {
      const JointMixture prior = generator.prior_for(report.test[uj], grid);
      per[uj] = evaluate_trajectory(prior, report.test[uj], cfg.split, cfg.plans);
    } catch (...) {
      errors[uj] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<std::string> names = {"prior"};
  for (const auto& p : cfg.plans) names.push_back(p.name);
  for (std::size_t pi = 0; pi < names.size(); ++pi) {
    std::vector<double> ai, ap, ni, np;
    for (const auto& rows : per) {
      ai.push_back(rows[pi].ade.input);
      ap.push_back(rows[pi].ade.prediction);
      ni.push_back(rows[pi].nll.input);
      np.push_back(rows[pi].nll.prediction);
    }
    report.summary.push_back(
        PlanSummary{names[pi], {mean_of(ai), mean_of(ap)}, {mean_of(ni), mean_of(np)}});
  }
  for (auto& rows : per) {
    if (rows.size() >= 3) {
      if (rows[2].nll.prediction > rows[1].nll.prediction) {
        report.nll_regressions_pred.push_back(rows[0].traj_id);
      }
      if (rows[2].nll.input > rows[1].nll.input) {
        report.nll_regressions_input.push_back(rows[0].traj_id);
      }
    }
    for (auto& r : rows) report.details.push_back(std::move(r));
  }
  return report;
}

void write_report_text(std::ostream& out, const BenchmarkReport& r) {
  constexpr int kLabel = 8;
  constexpr int kCell = 24;
  auto pad = [](std::string s, int w) {
    if (static_cast<int>(s.size()) < w) s.append(static_cast<std::size_t>(w) - s.size(), ' ');
    return s;
  };
  auto cell = [](const MetricPair& m) {
    return format_fixed(m.input, 2) + " / " + format_fixed(m.prediction, 2);
  };
  out << "train " << r.train_size << "  test " << r.test_size << "  train-loss "
      << format_fixed(r.train_loss, 4) << "  fit-iterations " << r.fit_iterations << '\n';
  out << pad("", kLabel);
  for (const auto& s : r.summary) out << pad(s.plan, kCell);
  out << '\n';
  out << pad("ML-ADE", kLabel);
  for (const auto& s : r.summary) out << pad(cell(s.ade), kCell);
  out << '\n';
  out << pad("NLL", kLabel);
  for (const auto& s : r.summary) out << pad(cell(s.nll), kCell);
  out << '\n';
  out << "(input / prediction)\n";
  if (r.summary.size() >= 3) {
    out << "NLL regressions " << r.summary[2].plan << " vs " << r.summary[1].plan
        << ": prediction " << r.nll_regressions_pred.size() << " of " << r.test_size
        << ", input " << r.nll_regressions_input.size() << " of " << r.test_size << '\n';
  }
}

std::string report_json(const BenchmarkReport& r) {
  using nlohmann::json;
  json rows = json::array();
  for (const auto& s : r.summary) {
    rows.push_back({{"plan", s.plan}, {"metric", "ML-ADE"}, {"input", s.ade.input},
                    {"prediction", s.ade.prediction}});
    rows.push_back({{"plan", s.plan}, {"metric", "NLL"}, {"input", s.nll.input},
                    {"prediction", s.nll.prediction}});
  }
  json doc = {{"command", "bench"},
              {"train_size", r.train_size},
              {"test_size", r.test_size},
              {"train_loss", r.train_loss},
              {"fit_iterations", r.fit_iterations},
              {"rows", std::move(rows)},
              {"nll_regressions",
               {{"prediction", r.nll_regressions_pred}, {"input", r.nll_regressions_input}}}};
  return doc.dump(2) + "\n";
}

void write_details_csv(std::ostream& out, const std::vector<TrajectoryScores>& rows) {
  out << "traj_id,plan,ade_in,ade_pred,nll_in,nll_pred\n";
  for (const auto& r : rows) {
    out << r.traj_id << ',' << r.plan << ',' << format_double(r.ade.input) << ','
        << format_double(r.ade.prediction) << ',' << format_double(r.nll.input) << ','
        << format_double(r.nll.prediction) << '\n';
  }
}

}  // namespace ncgp
