// ncgp: command-line front end for N-Curve Gaussian processes.
//
// Exit codes: 0 ok, 1 numeric failure, 2 usage error, 3 I/O or parse error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ncgp/errors.hpp"
#include "ncgp/fit.hpp"
#include "ncgp/format.hpp"
#include "ncgp/mixture.hpp"
#include "ncgp/ngp.hpp"
#include "ncgp/predict.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Global {
  bool json = false;
  bool quiet = false;
  int threads = 0;
};

Global g_opts;

void log(const std::string& msg) {
  if (!g_opts.quiet) std::cerr << "[ncgp] " << msg << '\n';
}

void require_input(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  if (!fs::is_regular_file(path)) {
    throw ncgp::IoError(std::string(what) + " '" + path + "' does not exist");
  }
}

void require_output(const std::string& path) {
  if (path.empty() || path == "-") return;
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ncgp::IoError("output directory '" + parent.string() + "' does not exist");
  }
}

std::vector<int> parse_steps(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("invalid step '" + item + "' in list '" + text + "'");
    }
  }
  return out;
}

Eigen::VectorXd parse_point(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("invalid coordinate '" + item + "'");
    }
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return a;
}

// Writes to `path`, or stdout when path is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ncgp::IoError("cannot write '" + path + "'");
  fn(out);
  if (!out) throw ncgp::IoError("failed writing '" + path + "'");
}

void print_json(const json& doc) { std::cout << doc.dump(2) << '\n'; }

// ---------------------------------------------------------------- kernels

struct KernelFlags {
  std::string kind = "rbf";
  double sigma = 1.0;
  double length_scale = 0.25;
  double sigma_b = 0.5;
  double c = 0.5;
  std::string model;
  int component = 0;
  int n = 20;

  void add(CLI::App* cmd) {
    cmd->add_option("--kernel", kind, "rbf | linear | ncurve")
        ->check(CLI::IsMember({"rbf", "linear", "ncurve"}));
    cmd->add_option("--sigma", sigma, "sigma (rbf, linear)");
    cmd->add_option("--length-scale", length_scale, "rbf length scale");
    cmd->add_option("--sigma-b", sigma_b, "linear kernel bias sigma_b");
    cmd->add_option("--c", c, "linear kernel offset c");
    cmd->add_option("--model", model, "ncgp-1 model file (ncurve kernel)");
    cmd->add_option("--component", component, "mixture component of the model (ncurve kernel)");
    cmd->add_option("--n", n, "number of equally spaced grid points")->check(CLI::Range(2, 100000));
  }

  std::pair<ncgp::KernelSpec, Eigen::Index> build() const {
    if (kind == "rbf") return {ncgp::RbfKernel{sigma, length_scale}, 1};
    if (kind == "linear") return {ncgp::LinearKernel{sigma, sigma_b, c}, 1};
    require_input(model, "model");
    const auto m = ncgp::load_model(model);
    if (component < 0 || static_cast<std::size_t>(component) >= m.size()) {
      throw UsageError("component " + std::to_string(component) + " outside model with K = " +
                       std::to_string(m.size()));
    }
    const auto& curve = m.curves()[static_cast<std::size_t>(component)];
    return {ncgp::NCurveKernel{curve}, curve.dim()};
  }

  void check() const {
    if (kind == "rbf" && !(sigma > 0.0 && length_scale > 0.0)) {
      throw UsageError("rbf kernel needs --sigma > 0 and --length-scale > 0");
    }
    if (kind == "linear" && !(sigma > 0.0 && sigma_b >= 0.0)) {
      throw UsageError("linear kernel needs --sigma > 0 and --sigma-b >= 0");
    }
    if (kind == "ncurve" && model.empty()) throw UsageError("ncurve kernel needs --model");
  }
};

// ---------------------------------------------------------------- synth

struct SynthFlags {
  int prototypes = 3;
  int per_prototype = 100;
  double noise = 0.5;
  std::string noise_model = "smooth";
  int n = 20;
  int d = 2;
  std::uint64_t seed = 0;
  std::string out;
};

int run_synth(const SynthFlags& f) {
  require_output(f.out);
  const auto model = f.noise_model == "white" ? ncgp::NoiseModel::White : ncgp::NoiseModel::Smooth;
  log("synthesizing " + std::to_string(f.prototypes) + " x " + std::to_string(f.per_prototype) +
      " trajectories");
  const auto data = ncgp::make_synthetic(f.prototypes, f.per_prototype, f.noise, f.seed, f.n, f.d, model);
  if (!f.out.empty()) ncgp::save_trajectories(data, f.out);
  if (g_opts.json) {
    print_json({{"command", "synth"},
                {"trajectories", data.size()},
                {"prototypes", f.prototypes},
                {"per_prototype", f.per_prototype},
                {"n", f.n},
                {"d", f.d},
                {"noise_sigma", f.noise},
                {"noise_model", f.noise_model},
                {"seed", f.seed},
                {"out", f.out}});
  } else if (f.out.empty()) {
    ncgp::write_trajectories_csv(std::cout, data);
  } else {
    std::cout << "wrote " << data.size() << " trajectories (N=" << f.n << ", d=" << f.d
              << ") to " << f.out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- fit

struct FitFlags {
  std::string data;
  ncgp::FitConfig cfg;
  std::uint64_t seed = 0;
  std::string out;
};

int run_fit(FitFlags f) {
  require_input(f.data, "trajectory file");
  require_output(f.out);
  f.cfg.seed = f.seed;
  try {
    f.cfg.validate();
  } catch (const ncgp::InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const auto data = ncgp::load_trajectories(f.data);
  log("fitting K=" + std::to_string(f.cfg.K) + " L=" + std::to_string(f.cfg.L) + " on " +
      std::to_string(data.size()) + " trajectories");
  const auto res = ncgp::fit_mixture_detailed(data, f.cfg);
  log("converged=" + std::string(res.converged ? "yes" : "no") + " after " +
      std::to_string(res.iterations) + " iterations");
  if (!f.out.empty()) ncgp::save_model(res.model, f.out);
  if (g_opts.json) {
    print_json({{"command", "fit"},
                {"trajectories", data.size()},
                {"K", f.cfg.K},
                {"L", f.cfg.L},
                {"seed", f.seed},
                {"iterations", res.iterations},
                {"converged", res.converged},
                {"final_loss", res.final_loss()},
                {"loss_trace", res.loss_trace},
                {"weights", res.model.weights()},
                {"out", f.out}});
  } else if (f.out.empty()) {
    std::cout << ncgp::to_model_json(res.model);
  } else {
    std::cout << "loss " << ncgp::format_double(res.final_loss()) << " after " << res.iterations
              << " iterations; weights";
    for (double w : res.model.weights()) std::cout << ' ' << ncgp::format_fixed(w, 4);
    std::cout << "\nwrote model to " << f.out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- gram / sample

struct GramFlags {
  KernelFlags kernel;
  bool normalize = false;
  std::string out;
};

int run_gram(const GramFlags& f) {
  f.kernel.check();
  require_output(f.out);
  const auto [spec, d] = f.kernel.build();
  const auto grid = ncgp::TimeGrid::uniform(f.kernel.n);
  log("assembling " + f.kernel.kind + " gram on " + std::to_string(f.kernel.n) + " points");
  const auto joint = ncgp::gram(spec, grid, d);
  Eigen::MatrixXd m = joint.dist.cov();
  if (f.normalize) m = ncgp::normalize_minmax(m);
  if (g_opts.json) {
    require_output(f.out);
    if (!f.out.empty()) emit(f.out, [&](std::ostream& o) { ncgp::write_gram_csv(o, grid, d, m); });
    print_json({{"command", "gram"},
                {"kernel", f.kernel.kind},
                {"n", f.kernel.n},
                {"d", d},
                {"normalized", f.normalize},
                {"grid", grid.values()},
                {"matrix", to_json(m)}});
    return 0;
  }
  emit(f.out, [&](std::ostream& o) { ncgp::write_gram_csv(o, grid, d, m); });
  return 0;
}

struct SampleFlags {
  KernelFlags kernel;
  int samples = 5;
  std::uint64_t seed = 0;
  std::string out;
};

int run_sample(const SampleFlags& f) {
  f.kernel.check();
  require_output(f.out);
  const auto [spec, d] = f.kernel.build();
  const auto grid = ncgp::TimeGrid::uniform(f.kernel.n);
  const auto joint = ncgp::gram(spec, grid, d);
  log("drawing " + std::to_string(f.samples) + " prior samples");
  const auto draws = ncgp::sample_prior(joint, f.seed, static_cast<std::size_t>(f.samples));
  if (g_opts.json) {
    if (!f.out.empty()) emit(f.out, [&](std::ostream& o) { ncgp::write_samples_csv(o, grid, draws); });
    json s = json::array();
    for (const auto& m : draws) s.push_back(to_json(m));
    Eigen::VectorXd sd(static_cast<Eigen::Index>(grid.size()) * d);
    sd = joint.dist.cov().diagonal().cwiseMax(0.0).cwiseSqrt();
    print_json({{"command", "sample"},
                {"kernel", f.kernel.kind},
                {"n", f.kernel.n},
                {"d", d},
                {"seed", f.seed},
                {"grid", grid.values()},
                {"mean", to_json(joint.dist.mean())},
                {"stddev", to_json(sd)},
                {"samples", std::move(s)}});
    return 0;
  }
  emit(f.out, [&](std::ostream& o) { ncgp::write_samples_csv(o, grid, draws); });
  return 0;
}

// ---------------------------------------------------------------- predict / refine

struct PredictFlags {
  std::string model;
  std::string data;
  int n_in = 8;
  int n_pred = 12;
  std::vector<std::string> traj_ids;
  std::string plan;  // empty for predict
  std::string plan_name;
  double obs_noise = 0.0;
  std::string means_out;
};

std::string auto_plan_name(const ncgp::SplitSpec& split, const std::vector<int>& steps) {
  std::vector<int> sorted = steps;
  std::sort(sorted.begin(), sorted.end());
  if (sorted == ncgp::posterior_a_plan(split).steps) return "posteriorA";
  if (split.n_in >= 5 && sorted == ncgp::posterior_b_plan(split).steps) return "posteriorB";
  return "custom";
}

int run_predict(const PredictFlags& f, bool refining) {
  require_input(f.model, "model");
  require_input(f.data, "trajectory file");
  require_output(f.means_out);
  const ncgp::SplitSpec split{f.n_in, f.n_pred};
  try {
    split.validate();
  } catch (const ncgp::Error& e) {
    throw UsageError(e.what());
  }
  std::optional<ncgp::ConditionPlan> plan;
  if (refining) {
    const auto steps = parse_steps(f.plan);
    if (steps.empty()) throw UsageError("--plan needs at least one step");
    plan = ncgp::ConditionPlan{f.plan_name.empty() ? auto_plan_name(split, steps) : f.plan_name,
                               steps, f.obs_noise};
    try {
      plan->validate(split.total());
    } catch (const ncgp::Error& e) {
      throw UsageError(e.what());
    }
  }
  const auto model = ncgp::load_model(f.model);
  auto data = ncgp::load_trajectories(f.data);
  if (data.front().length() != split.total()) {
    throw UsageError("trajectories have " + std::to_string(data.front().length()) +
                     " steps but --n-in + --n-pred = " + std::to_string(split.total()));
  }
  if (!f.traj_ids.empty()) {
    ncgp::TrajectorySet picked;
    for (const auto& id : f.traj_ids) {
      auto it = std::find_if(data.begin(), data.end(), [&](const auto& t) { return t.id == id; });
      if (it == data.end()) throw UsageError("no trajectory with id '" + id + "'");
      picked.push_back(*it);
    }
    data = std::move(picked);
  }
  const auto grid = ncgp::TimeGrid::uniform(split.total());
  const ncgp::FixedMixturePrior generator(model);
  log(std::string(refining ? "refining " : "predicting ") + std::to_string(data.size()) +
      " trajectories");

  std::vector<ncgp::TrajectoryScores> rows;
  json jrows = json::array();
  std::ostringstream means;
  means << "traj_id,plan,step,observed";
  for (Eigen::Index k = 0; k < model.dim(); ++k) means << ",dim" << k;
  means << '\n';
  for (const auto& traj : data) {
    const auto prior = generator.prior_for(traj, grid);
    const auto dist = plan ? ncgp::refine(prior, traj, *plan) : prior;
    const auto scores = ncgp::evaluate_trajectory(prior, traj, split,
                                                  plan ? std::vector{*plan} : std::vector<ncgp::ConditionPlan>{});
    const auto& row = scores.back();
    rows.push_back(row);
    const std::size_t ml = ncgp::ml_component(dist);
    for (int s = 0; s < split.total(); ++s) {
      const Eigen::VectorXd mu = ncgp::component_mean_at(dist, ml, s);
      means << traj.id << ',' << row.plan << ',' << s << ','
            << (dist.observation_at(s) ? 1 : 0);
      for (Eigen::Index k = 0; k < mu.size(); ++k) means << ',' << ncgp::format_double(mu(k));
      means << '\n';
    }
    jrows.push_back({{"traj_id", traj.id},
                     {"plan", row.plan},
                     {"ml_component", ml},
                     {"weights", dist.weights},
                     {"ade_in", row.ade.input},
                     {"ade_pred", row.ade.prediction},
                     {"nll_in", row.nll.input},
                     {"nll_pred", row.nll.prediction}});
  }
  if (!f.means_out.empty()) emit(f.means_out, [&](std::ostream& o) { o << means.str(); });
  if (g_opts.json) {
    json doc = {{"command", refining ? "refine" : "predict"},
                {"n_in", f.n_in},
                {"n_pred", f.n_pred},
                {"rows", std::move(jrows)}};
    if (plan) {
      doc["plan"] = {{"name", plan->name}, {"steps", plan->steps}, {"obs_noise", plan->obs_noise}};
    }
    print_json(doc);
  } else {
    ncgp::write_details_csv(std::cout, rows);
  }
  return 0;
}

// ---------------------------------------------------------------- update

struct UpdateFlags {
  std::string model;
  std::string data;
  std::string traj_id;
  int n_in = 8;
  int n_pred = 12;
  std::string base_plan;
  std::string steps;
  std::vector<std::string> points;
  double obs_noise = 0.0;
};

int run_update(const UpdateFlags& f) {
  require_input(f.model, "model");
  require_input(f.data, "trajectory file");
  const ncgp::SplitSpec split{f.n_in, f.n_pred};
  const auto base_steps = parse_steps(f.base_plan);
  const auto new_steps = parse_steps(f.steps);
  if (new_steps.empty() && f.points.empty()) {
    throw UsageError("update needs --steps and/or --point");
  }
  const auto model = ncgp::load_model(f.model);
  const auto data = ncgp::load_trajectories(f.data);
  auto it = std::find_if(data.begin(), data.end(), [&](const auto& t) { return t.id == f.traj_id; });
  if (it == data.end()) throw UsageError("no trajectory with id '" + f.traj_id + "'");
  const ncgp::Trajectory& traj = *it;
  if (traj.length() != split.total()) {
    throw UsageError("trajectory length does not match --n-in + --n-pred");
  }

  std::vector<std::pair<int, Eigen::VectorXd>> obs;
  for (int s : new_steps) {
    if (s < 0 || s >= traj.length()) throw UsageError("step " + std::to_string(s) + " out of range");
    obs.emplace_back(s, traj.point(s));
  }
  for (const auto& p : f.points) {
    const auto colon = p.find(':');
    if (colon == std::string::npos) throw UsageError("--point expects step:x,y,...");
    const auto st = parse_steps(p.substr(0, colon));
    if (st.size() != 1) throw UsageError("--point expects a single step before ':'");
    obs.emplace_back(st.front(), parse_point(p.substr(colon + 1)));
  }

  const auto grid = ncgp::TimeGrid::uniform(split.total());
  const auto prior = ncgp::FixedMixturePrior(model).prior_for(traj, grid);
  ncgp::JointMixture base = prior;
  if (!base_steps.empty()) {
    base = ncgp::refine(prior, traj, ncgp::ConditionPlan{"base", base_steps, f.obs_noise});
  }
  log("updating on " + std::to_string(obs.size()) + " observations");
  const auto post = ncgp::update(base, obs, f.obs_noise);
  const std::size_t ml = ncgp::ml_component(post);

  std::vector<int> pred_latent;
  for (int s : split.prediction_steps()) {
    if (post.position_of(s)) pred_latent.push_back(s);
  }
  const double ade_pred = pred_latent.empty() ? 0.0 : ncgp::ade(post, traj, pred_latent);

  if (g_opts.json) {
    json means = json::array();
    for (int s = 0; s < split.total(); ++s) {
      means.push_back({{"step", s},
                       {"observed", post.observation_at(s) != nullptr},
                       {"mean", to_json(ncgp::component_mean_at(post, ml, s))}});
    }
    std::vector<int> observed_steps;
    for (const auto& [s, v] : obs) observed_steps.push_back(s);
    print_json({{"command", "update"},
                {"traj_id", traj.id},
                {"base_steps", base_steps},
                {"observed_steps", observed_steps},
                {"prior_weights", base.weights},
                {"posterior_weights", post.weights},
                {"ml_component", ml},
                {"ade_pred", ade_pred},
                {"means", std::move(means)}});
    return 0;
  }
  std::cout << "traj " << traj.id << "  ml-component " << ml << "  ade_pred "
            << ncgp::format_double(ade_pred) << '\n';
  std::cout << "weights before";
  for (double w : base.weights) std::cout << ' ' << ncgp::format_double(w);
  std::cout << "\nweights after ";
  for (double w : post.weights) std::cout << ' ' << ncgp::format_double(w);
  std::cout << "\nstep,observed";
  for (Eigen::Index k = 0; k < post.d(); ++k) std::cout << ",dim" << k;
  std::cout << '\n';
  for (int s = 0; s < split.total(); ++s) {
    const auto mu = ncgp::component_mean_at(post, ml, s);
    std::cout << s << ',' << (post.observation_at(s) ? 1 : 0);
    for (Eigen::Index k = 0; k < mu.size(); ++k) std::cout << ',' << ncgp::format_double(mu(k));
    std::cout << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchFlags {
  std::string data;
  int prototypes = 3;
  int per_prototype = 100;
  double noise = 0.5;
  std::string noise_model = "smooth";
  int d = 2;
  ncgp::FitConfig fit;
  int n_in = 8;
  int n_pred = 12;
  std::uint64_t seed = 0;
  double obs_noise = 0.0;
  std::vector<std::string> extra_plans;
  std::string detail_out;
  std::string model_out;
  std::string train_out;
  std::string test_out;
};

int run_bench(const BenchFlags& f) {
  for (const auto* p : {&f.detail_out, &f.model_out, &f.train_out, &f.test_out}) require_output(*p);
  if (!f.data.empty()) require_input(f.data, "trajectory file");
  ncgp::BenchmarkConfig cfg;
  cfg.fit = f.fit;
  cfg.split = ncgp::SplitSpec{f.n_in, f.n_pred};
  cfg.seed = f.seed;
  cfg.threads = g_opts.threads;
  try {
    cfg.split.validate();
    cfg.fit.validate();
    cfg.plans = {ncgp::posterior_a_plan(cfg.split, f.obs_noise),
                 ncgp::posterior_b_plan(cfg.split, f.obs_noise)};
    for (const auto& spec : f.extra_plans) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--plan expects name=s1,s2,...");
      cfg.plans.push_back(ncgp::ConditionPlan{spec.substr(0, eq), parse_steps(spec.substr(eq + 1)),
                                              f.obs_noise});
    }
    for (const auto& p : cfg.plans) p.validate(cfg.split.total());
  } catch (const ncgp::Error& e) {
    throw UsageError(e.what());
  }

  ncgp::TrajectorySet data;
  if (f.data.empty()) {
    log("no --data given; synthesizing the default benchmark set");
    data = ncgp::make_synthetic(f.prototypes, f.per_prototype, f.noise, f.seed, cfg.split.total(), f.d,
                                f.noise_model == "white" ? ncgp::NoiseModel::White
                                                         : ncgp::NoiseModel::Smooth);
  } else {
    data = ncgp::load_trajectories(f.data);
  }
  log("benchmarking on " + std::to_string(data.size()) + " trajectories");
  const auto report = ncgp::run_benchmark(data, cfg);

  if (!f.detail_out.empty()) {
    emit(f.detail_out, [&](std::ostream& o) { ncgp::write_details_csv(o, report.details); });
  }
  if (!f.model_out.empty()) ncgp::save_model(report.model, f.model_out);
  if (!f.train_out.empty()) ncgp::save_trajectories(report.train, f.train_out);
  if (!f.test_out.empty()) ncgp::save_trajectories(report.test, f.test_out);
  if (g_opts.json) {
    std::cout << ncgp::report_json(report);
  } else {
    ncgp::write_report_text(std::cout, report);
  }
  return 0;
}

void add_fit_options(CLI::App* cmd, ncgp::FitConfig& cfg) {
  cmd->add_option("--k", cfg.K, "mixture components")->check(CLI::PositiveNumber);
  cmd->add_option("--l", cfg.L, "curve degree")->check(CLI::Range(1, ncgp::kMaxDegree));
  cmd->add_option("--max-iters", cfg.max_iters, "EM iteration cap");
  cmd->add_option("--step-size", cfg.step_size, "initial log-variance gradient step");
  cmd->add_option("--min-variance", cfg.min_variance, "control-point variance floor");
  cmd->add_option("--restarts", cfg.restarts, "independent initializations");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"N-Curve Gaussian processes: priors, conditioning, fitting and benchmarks"};
  app.require_subcommand(1);
  app.add_flag("--json", g_opts.json, "machine-readable JSON on stdout");
  app.add_flag("--quiet,-q", g_opts.quiet, "suppress progress logging on stderr");
  app.add_option("--threads", g_opts.threads, "cap on worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.fallthrough();

  SynthFlags synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic multi-modal trajectory set");
  c_synth->add_option("--prototypes", synth.prototypes)->check(CLI::PositiveNumber);
  c_synth->add_option("--per-prototype", synth.per_prototype)->check(CLI::PositiveNumber);
  c_synth->add_option("--noise", synth.noise, "per-step deviation std")->check(CLI::NonNegativeNumber);
  c_synth->add_option("--noise-model", synth.noise_model)->check(CLI::IsMember({"smooth", "white"}));
  c_synth->add_option("--n", synth.n, "steps per trajectory")->check(CLI::Range(2, 100000));
  c_synth->add_option("--d", synth.d, "point dimension")->check(CLI::Range(1, 64));
  c_synth->add_option("--seed", synth.seed)->required();
  c_synth->add_option("--out", synth.out, "trajectory CSV (stdout if omitted)");

  FitFlags fit;
  auto* c_fit = app.add_subcommand("fit", "fit an N-Curve mixture to a trajectory CSV");
  c_fit->add_option("--data", fit.data)->required();
  add_fit_options(c_fit, fit.cfg);
  c_fit->add_option("--seed", fit.seed)->required();
  c_fit->add_option("--out", fit.out, "model JSON (stdout if omitted)");

  GramFlags gram;
  auto* c_gram = app.add_subcommand("gram", "export a Gram matrix as CSV");
  gram.kernel.add(c_gram);
  c_gram->add_flag("--normalize", gram.normalize, "min-max normalize entries to [0, 1]");
  c_gram->add_option("--out", gram.out, "CSV path (stdout if omitted)");

  SampleFlags smp;
  auto* c_sample = app.add_subcommand("sample", "draw sequences from a GP prior");
  smp.kernel.add(c_sample);
  c_sample->add_option("--samples", smp.samples)->check(CLI::PositiveNumber);
  c_sample->add_option("--seed", smp.seed)->required();
  c_sample->add_option("--out", smp.out, "CSV path (stdout if omitted)");

  PredictFlags pred;
  auto* c_predict = app.add_subcommand("predict", "score the prior prediction for trajectories");
  PredictFlags ref;
  auto* c_refine = app.add_subcommand("refine", "condition the prior on input points and score");
  for (auto [cmd, fl] : {std::pair{c_predict, &pred}, std::pair{c_refine, &ref}}) {
    cmd->add_option("--model", fl->model)->required();
    cmd->add_option("--data", fl->data)->required();
    cmd->add_option("--n-in", fl->n_in);
    cmd->add_option("--n-pred", fl->n_pred);
    cmd->add_option("--traj", fl->traj_ids, "restrict to these trajectory ids");
    cmd->add_option("--means-out", fl->means_out, "CSV of ML-component mean sequences");
  }
  c_refine->add_option("--plan", ref.plan, "0-based steps to condition on, e.g. 3,7")->required();
  c_refine->add_option("--name", ref.plan_name, "plan label in the output");
  c_refine->add_option("--obs-noise", ref.obs_noise)->check(CLI::NonNegativeNumber);

  UpdateFlags upd;
  auto* c_update = app.add_subcommand("update", "update a prediction with new in-horizon observations");
  c_update->add_option("--model", upd.model)->required();
  c_update->add_option("--data", upd.data)->required();
  c_update->add_option("--traj", upd.traj_id)->required();
  c_update->add_option("--n-in", upd.n_in);
  c_update->add_option("--n-pred", upd.n_pred);
  c_update->add_option("--base-plan", upd.base_plan, "input steps conditioned on first, e.g. 7");
  c_update->add_option("--steps", upd.steps, "new observed steps, values read from the trajectory");
  c_update->add_option("--point", upd.points, "explicit observation step:x,y,...");
  c_update->add_option("--obs-noise", upd.obs_noise)->check(CLI::NonNegativeNumber);

  BenchFlags bench;
  auto* c_bench = app.add_subcommand("bench", "fit on 80%, evaluate prior and posteriors on 20%");
  c_bench->add_option("--data", bench.data, "trajectory CSV (synthesized if omitted)");
  c_bench->add_option("--prototypes", bench.prototypes)->check(CLI::PositiveNumber);
  c_bench->add_option("--per-prototype", bench.per_prototype)->check(CLI::PositiveNumber);
  c_bench->add_option("--noise", bench.noise)->check(CLI::NonNegativeNumber);
  c_bench->add_option("--noise-model", bench.noise_model)->check(CLI::IsMember({"smooth", "white"}));
  c_bench->add_option("--d", bench.d)->check(CLI::Range(1, 64));
  add_fit_options(c_bench, bench.fit);
  c_bench->add_option("--n-in", bench.n_in);
  c_bench->add_option("--n-pred", bench.n_pred);
  c_bench->add_option("--seed", bench.seed)->required();
  c_bench->add_option("--obs-noise", bench.obs_noise)->check(CLI::NonNegativeNumber);
  c_bench->add_option("--plan", bench.extra_plans, "extra plan name=s1,s2,...");
  c_bench->add_option("--detail-out", bench.detail_out, "per-trajectory CSV");
  c_bench->add_option("--model-out", bench.model_out, "fitted model JSON");
  c_bench->add_option("--train-out", bench.train_out, "training split CSV");
  c_bench->add_option("--test-out", bench.test_out, "test split CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

#ifdef _OPENMP
  if (g_opts.threads > 0) omp_set_num_threads(g_opts.threads);
#endif

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_fit) return run_fit(fit);
    if (*c_gram) return run_gram(gram);
    if (*c_sample) return run_sample(smp);
    if (*c_predict) return run_predict(pred, false);
    if (*c_refine) return run_predict(ref, true);
    if (*c_update) return run_update(upd);
    if (*c_bench) return run_bench(bench);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ncgp::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ncgp::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ncgp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitUsage;
}
