#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ncgp/errors.hpp"
#include "ncgp/fit.hpp"
#include "ncgp/predict.hpp"
#include "support/oracles.hpp"

using ncgp::FitConfig;
using ncgp::GaussianDist;
using ncgp::Index;
using ncgp::NCurve;
using ncgp::NCurveMixture;
using ncgp::Trajectory;
using ncgp::TrajectorySet;

namespace {

GaussianDist scalar(double mean, double var) {
  return GaussianDist::diagonal(Eigen::VectorXd::Constant(1, mean), Eigen::VectorXd::Constant(1, var));
}

/// `count` copies of the Bezier path through `control` plus i.i.d. N(0, sigma^2) per coordinate.
TrajectorySet noisy_paths(const Eigen::MatrixXd& control, int count, int n, double sigma, std::uint64_t seed,
                          const std::string& prefix = "x") {
  const Eigen::MatrixXd path = oracle::construction(static_cast<int>(control.rows()) - 1, 1,
                                                    ncgp::uniform_grid(n).values()) * control;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sigma);
  TrajectorySet out;
  for (int i = 0; i < count; ++i) {
    Eigen::MatrixXd pts = path;
    for (Index k = 0; k < pts.size(); ++k) pts.data()[k] += z(rng);
    out.push_back({prefix + std::to_string(i), pts});
  }
  return out;
}

FitConfig small_config(int k, int l, std::uint64_t seed = 0) {
  FitConfig cfg;
  cfg.K = k;
  cfg.L = l;
  cfg.seed = seed;
  cfg.max_iters = 60;
  return cfg;
}

}  // namespace

TEST_SUITE("fit") {

TEST_CASE("config validation") {
  FitConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.K = 0;
  CHECK_THROWS(cfg.validate());
  cfg = FitConfig{};
  cfg.L = 0;
  CHECK_THROWS(cfg.validate());
  cfg = FitConfig{};
  cfg.min_variance = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = FitConfig{};
  cfg.restarts = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("nll_loss examples") {
  const NCurveMixture unit({1.0}, {NCurve({scalar(0, 1), scalar(5, 1)})});
  const TrajectorySet at_mean{{"a", Eigen::MatrixXd::Zero(1, 1)}};
  CHECK(ncgp::nll_loss(unit, at_mean, ncgp::TimeGrid({0.0})) == doctest::Approx(0.918938533).epsilon(1e-9));

  std::mt19937_64 rng(1);
  const auto c = oracle::random_curve(3, 2, rng);
  const auto data = noisy_paths(Eigen::MatrixXd::Random(4, 2), 5, 7, 0.5, 2);
  const auto grid = ncgp::uniform_grid(7);
  const NCurveMixture one({1.0}, {c});
  const double base = ncgp::nll_loss(one, data, grid);
  TrajectorySet doubled = data;
  doubled.insert(doubled.end(), data.begin(), data.end());
  CHECK(ncgp::nll_loss(one, doubled, grid) == doctest::Approx(base).epsilon(1e-13));
  CHECK(ncgp::nll_loss(NCurveMixture({0.4, 0.6}, {c, c}), data, grid) == doctest::Approx(base).epsilon(1e-13));

  // Per-step marginals, not the joint: the loss is a sum of independent step terms.
  double manual = 0.0;
  for (const auto& t : data) {
    for (int j = 0; j < 7; ++j) manual -= ncgp::log_pdf(ncgp::curve_point(c, grid[j]), t.point(j));
  }
  CHECK(base == doctest::Approx(manual / 5.0).epsilon(1e-12));

  CHECK_THROWS(ncgp::nll_loss(one, data, ncgp::uniform_grid(6)));
}

TEST_CASE("single-component recovery within three standard errors") {
  Eigen::MatrixXd control(4, 2);
  control << 0, 0, 3, 6, 7, 2, 10, 5;
  const int m = 200;
  const double sigma = 0.2;
  const auto data = noisy_paths(control, m, 20, sigma, 7);
  const auto model = ncgp::fit_mixture(data, small_config(1, 3));
  const auto grid = ncgp::uniform_grid(20);
  const Eigen::MatrixXd truth = oracle::construction(3, 1, grid.values()) * control;
  const double se = sigma / std::sqrt(static_cast<double>(m));
  for (int j = 0; j < 20; ++j) {
    const Eigen::VectorXd mu = ncgp::curve_point(model.curves()[0], grid[j]).mean();
    CHECK((mu - truth.row(j).transpose()).cwiseAbs().maxCoeff() < 3.0 * se);
  }
}

TEST_CASE("two separated clusters recover their proportions") {
  Eigen::MatrixXd a(3, 2), b(3, 2);
  a << 0, 0, 2, 4, 4, 0;
  b << 10, 10, 8, 6, 6, 10;
  TrajectorySet data = noisy_paths(a, 60, 12, 0.3, 1, "a");
  const auto more = noisy_paths(b, 140, 12, 0.3, 2, "b");
  data.insert(data.end(), more.begin(), more.end());
  const auto model = ncgp::fit_mixture(data, small_config(2, 2, 5));
  std::vector<double> w = model.weights();
  std::sort(w.begin(), w.end());
  CHECK(std::abs(w[0] - 0.3) < 0.05);
  CHECK(std::abs(w[1] - 0.7) < 0.05);
}

TEST_CASE("a repeated trajectory is reproduced with variances at the floor") {
  Eigen::MatrixXd control(4, 2);
  control << 1, 2, 4, 8, 6, -1, 9, 3;
  const TrajectorySet data(5, Trajectory{"r", oracle::construction(3, 1, ncgp::uniform_grid(15).values()) * control});
  FitConfig cfg = small_config(1, 3);
  cfg.max_iters = 200;
  const auto res = ncgp::fit_mixture_detailed(data, cfg);
  const auto& curve = res.model.curves()[0];
  for (int l = 0; l <= 3; ++l) {
    CHECK((curve.control_point(l).mean() - control.row(l).transpose()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(curve.control_point(l).cov().diagonal().maxCoeff() <= cfg.min_variance * (1.0 + 1e-9));
  }
}

TEST_CASE("loss trace is non-increasing and the result deterministic") {
  const auto data = ncgp::make_synthetic(3, 30, 0.5, 11, 20, 2);
  auto cfg = small_config(3, 5, 4);
  const auto res = ncgp::fit_mixture_detailed(data, cfg);
  REQUIRE(res.loss_trace.size() >= 2);
  for (std::size_t i = 1; i < res.loss_trace.size(); ++i) {
    CHECK(res.loss_trace[i] <= res.loss_trace[i - 1] + 1e-9);
  }
  CHECK(res.final_loss() == doctest::Approx(ncgp::nll_loss(res.model, data, ncgp::uniform_grid(20))).epsilon(1e-12));
  const auto again = ncgp::fit_mixture_detailed(data, cfg);
  CHECK(ncgp::to_model_json(again.model) == ncgp::to_model_json(res.model));
  CHECK(again.loss_trace == res.loss_trace);
}

TEST_CASE("dataset order does not matter") {
  const auto data = ncgp::make_synthetic(3, 20, 0.5, 3, 20, 2);
  const auto cfg = small_config(3, 4, 9);
  const auto base = ncgp::fit_mixture_detailed(data, cfg);
  TrajectorySet shuffled = data;
  std::mt19937_64 rng(77);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto other = ncgp::fit_mixture_detailed(shuffled, cfg);
  CHECK(std::abs(base.final_loss() - other.final_loss()) < 1e-9);
}

TEST_CASE("restarts keep the best run") {
  const auto data = ncgp::make_synthetic(3, 20, 0.5, 5, 20, 2);
  auto cfg = small_config(3, 4, 1);
  const double single = ncgp::fit_mixture_detailed(data, cfg).final_loss();
  cfg.restarts = 3;
  const auto best = ncgp::fit_mixture_detailed(data, cfg);
  CHECK(best.final_loss() <= single + 1e-12);
  CHECK(best.best_restart >= 0);
  CHECK(best.best_restart < 3);
}

TEST_CASE("fitted model round-trips through json bit for bit") {
  const auto data = ncgp::make_synthetic(2, 15, 0.3, 8, 10, 2);
  const auto model = ncgp::fit_mixture(data, small_config(2, 3, 2));
  const std::string text = ncgp::to_model_json(model);
  CHECK(ncgp::to_model_json(ncgp::parse_model_json(text)) == text);
}

TEST_CASE("degenerate inputs") {
  const TrajectorySet same(6, Trajectory{"s", Eigen::MatrixXd::Ones(5, 2)});
  CHECK_THROWS_AS(ncgp::fit_mixture(same, small_config(2, 2)), ncgp::DegenerateData);
  CHECK_NOTHROW(ncgp::fit_mixture(same, small_config(1, 2)));
  const auto few = ncgp::make_synthetic(1, 2, 0.3, 1, 5, 2);
  CHECK_THROWS_AS(ncgp::fit_mixture(few, small_config(3, 2)), ncgp::InvalidCount);
}

TEST_CASE("prior generator seam") {
  std::mt19937_64 rng(3);
  const NCurveMixture m({0.25, 0.75}, {oracle::random_curve(2, 2, rng), oracle::random_curve(2, 2, rng)});
  const auto grid = ncgp::uniform_grid(6);
  const auto direct = ncgp::mixture_prior(m, grid);
  const auto seam = ncgp::predict_prior(m, grid);
  CHECK(seam.weights == direct.weights);
  CHECK(seam.components[1].dist.cov() == direct.components[1].dist.cov());

  const ncgp::FixedMixturePrior gen(m);
  const Trajectory a{"a", Eigen::MatrixXd::Zero(6, 2)}, b{"b", Eigen::MatrixXd::Ones(6, 2)};
  CHECK(gen.prior_for(a, grid).components[0].dist.mean() == gen.prior_for(b, grid).components[0].dist.mean());
}

}  // TEST_SUITE
