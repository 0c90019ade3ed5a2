// Parallel kernels against their serial references.
//
// Gram assembly: gram() vs gram_serial() over grid size.
// Test-set scoring and EM fitting: the same call with 1 worker vs all workers.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "ncgp/fit.hpp"
#include "ncgp/ngp.hpp"
#include "ncgp/predict.hpp"

namespace {

ncgp::NCurve make_curve(int degree, ncgp::Index d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<ncgp::GaussianDist> pts;
  for (int l = 0; l <= degree; ++l) {
    Eigen::MatrixXd a(d, d);
    for (ncgp::Index i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
    Eigen::VectorXd mu(d);
    for (ncgp::Index i = 0; i < d; ++i) mu(i) = 3.0 * z(rng);
    pts.emplace_back(mu, a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d));
  }
  return ncgp::NCurve(pts);
}

void BM_GramSerial(benchmark::State& state) {
  const auto curve = make_curve(9, 2);
  const auto grid = ncgp::uniform_grid(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ncgp::gram_serial(ncgp::NCurveKernel{curve}, grid, 2));
}

void BM_GramParallel(benchmark::State& state) {
  const auto curve = make_curve(9, 2);
  const auto grid = ncgp::uniform_grid(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ncgp::gram(ncgp::NCurveKernel{curve}, grid, 2));
}

BENCHMARK(BM_GramSerial)->RangeMultiplier(2)->Range(20, 320)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GramParallel)->RangeMultiplier(2)->Range(20, 320)->Unit(benchmark::kMicrosecond);

struct Scoring {
  ncgp::NCurveMixture model;
  ncgp::TrajectorySet test;

  static const Scoring& get() {
    static const Scoring s = [] {
      const auto data = ncgp::make_synthetic(3, 200, 0.5, 42, 20, 2);
      ncgp::FitConfig cfg;
      cfg.seed = 42;
      return Scoring{ncgp::fit_mixture(data, cfg), data};
    }();
    return s;
  }
};

// range(0) = worker count; 0 means every available worker.
void BM_ScoreTestSet(benchmark::State& state) {
  const auto& s = Scoring::get();
  const ncgp::SplitSpec split;
  const auto plans = std::vector{ncgp::posterior_a_plan(split), ncgp::posterior_b_plan(split)};
  const auto prior = ncgp::predict_prior(s.model, ncgp::uniform_grid(split.total()));
  const int workers = state.range(0) == 0 ? omp_get_max_threads() : static_cast<int>(state.range(0));
  for (auto _ : state) {
    std::vector<std::vector<ncgp::TrajectoryScores>> rows(s.test.size());
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (std::size_t i = 0; i < s.test.size(); ++i) {
      rows[i] = ncgp::evaluate_trajectory(prior, s.test[i], split, plans);
    }
    benchmark::DoNotOptimize(rows);
  }
  state.counters["workers"] = workers;
}

BENCHMARK(BM_ScoreTestSet)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_Fit(benchmark::State& state) {
  const auto data = ncgp::make_synthetic(3, 200, 0.5, 42, 20, 2);
  ncgp::FitConfig cfg;
  cfg.seed = 42;
  const int saved = omp_get_max_threads();
  const int workers = state.range(0) == 0 ? saved : static_cast<int>(state.range(0));
  omp_set_num_threads(workers);
  for (auto _ : state) benchmark::DoNotOptimize(ncgp::fit_mixture(data, cfg));
  omp_set_num_threads(saved);
  state.counters["workers"] = workers;
}

BENCHMARK(BM_Fit)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
