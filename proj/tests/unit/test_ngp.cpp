#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <omp.h>

#include "ncgp/errors.hpp"
#include "ncgp/ngp.hpp"
#include "support/oracles.hpp"

using ncgp::GaussianDist;
using ncgp::Index;
using ncgp::NCurve;
using ncgp::TimeGrid;

namespace {

GaussianDist scalar(double mean, double var) {
  return GaussianDist::diagonal(Eigen::VectorXd::Constant(1, mean), Eigen::VectorXd::Constant(1, var));
}

}  // namespace

TEST_SUITE("ngp") {

TEST_CASE("univariate kernel examples") {
  const auto p1 = oracle::p1_curve();
  CHECK(ncgp::kernel_univariate(p1, 0.0, 1.0) == doctest::Approx(0.0));
  CHECK(ncgp::kernel_univariate(p1, 0.0, 0.0) == doctest::Approx(1.0));
  CHECK(ncgp::kernel_univariate(p1, 0.5, 0.5) == doctest::Approx(0.5));

  const NCurve fixed({scalar(1, 0), scalar(-2, 0), scalar(4, 0)});
  for (double ti : {0.0, 0.3, 1.0}) {
    for (double tj : {0.1, 0.6}) CHECK(std::abs(ncgp::kernel_univariate(fixed, ti, tj)) < 1e-12);
  }

  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(ncgp::kernel_univariate(oracle::random_curve(2, 2, rng), 0.1, 0.2), ncgp::DimensionError);
}

TEST_CASE("kernel matrix identities on random curves") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const auto c = oracle::random_curve(1 + rep % 9, 1 + rep % 3, rng);
    const double ti = u(rng), tj = u(rng);
    const Eigen::MatrixXd k = ncgp::kernel_matrix(c, ti, tj);
    // Mean terms cancel; only the control covariances survive.
    CHECK((k - oracle::simplified_kernel(c, ti, tj)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((k - ncgp::kernel_matrix(c, tj, ti).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ncgp::kernel_matrix(c, ti, ti) - ncgp::curve_point(c, ti).cov()).cwiseAbs().maxCoeff() < 1e-12);
    if (c.dim() == 1) CHECK(std::abs(k(0, 0) - ncgp::kernel_univariate(c, ti, tj)) < 1e-12);
  }
}

TEST_CASE("zero-mean control points give the independent-sum covariance") {
  std::vector<GaussianDist> pts;
  std::mt19937_64 rng(4);
  for (int l = 0; l < 4; ++l) pts.emplace_back(Eigen::VectorXd::Zero(2), oracle::random_spd(2, rng));
  const NCurve c(pts);
  const auto k = ncgp::kernel_matrix(c, 0.2, 0.7);
  CHECK((k - oracle::simplified_kernel(c, 0.2, 0.7)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("reference kernels") {
  const ncgp::RbfKernel rbf{1.0, 0.25};
  CHECK(ncgp::rbf_kernel(rbf, 0.3, 0.3) == 1.0);
  CHECK(ncgp::rbf_kernel(rbf, 0.0, 0.25) == doctest::Approx(std::exp(-0.5)));
  const ncgp::LinearKernel lin{0.5, 0.5, 0.5};
  CHECK(ncgp::linear_kernel(lin, 0.0, 1.0) == doctest::Approx(0.25 - 0.0625));
  CHECK_THROWS(ncgp::validate(ncgp::KernelSpec{ncgp::RbfKernel{0.0, 0.25}}));
  CHECK_THROWS(ncgp::validate(ncgp::KernelSpec{ncgp::LinearKernel{0.5, -1.0, 0.5}}));
}

TEST_CASE("mean vector") {
  const NCurve line({GaussianDist(Eigen::Vector2d(0, 0), Eigen::Matrix2d::Zero()),
                     GaussianDist(Eigen::Vector2d(1, 1), Eigen::Matrix2d::Zero())});
  Eigen::VectorXd expected(6);
  expected << 0, 0, 0.5, 0.5, 1, 1;
  CHECK((ncgp::mean_vector(line, ncgp::uniform_grid(3)) - expected).norm() < 1e-15);
  CHECK(ncgp::mean_vector(line, TimeGrid({0.0})) == line.control_point(0).mean());
}

TEST_CASE("gram equals the construction-matrix joint") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 40; ++rep) {
    const auto c = oracle::random_curve(1 + rep % 9, 1 + rep % 3, rng);
    const auto grid = oracle::random_grid(2 + rep % 12, rng);
    const auto joint = ncgp::gram(ncgp::NCurveKernel{c}, grid, c.dim());
    const Eigen::MatrixXd cm = oracle::construction(c.degree(), c.dim(), grid.values());
    CHECK((joint.dist.cov() - cm * c.block_covariance() * cm.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((joint.dist.mean() - cm * c.stacked_means()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_NOTHROW(ncgp::cholesky_with_jitter(joint.dist.cov()));
  }
}

TEST_CASE("gram assembly is independent of the thread count") {
  std::mt19937_64 rng(9);
  const auto c = oracle::random_curve(7, 3, rng);
  const auto grid = ncgp::uniform_grid(40);
  const auto ref = ncgp::gram_serial(ncgp::NCurveKernel{c}, grid, 3);
  const int saved = omp_get_max_threads();
  for (int threads : {1, 2, 3, 8}) {
    omp_set_num_threads(threads);
    const auto par = ncgp::gram(ncgp::NCurveKernel{c}, grid, 3);
    CHECK(par.dist.cov() == ref.dist.cov());
    CHECK(par.dist.mean() == ref.dist.mean());
    const auto rbf = ncgp::gram(ncgp::RbfKernel{}, grid, 1);
    CHECK(rbf.dist.cov() == ncgp::gram_serial(ncgp::RbfKernel{}, grid, 1).dist.cov());
  }
  omp_set_num_threads(saved);
}

TEST_CASE("gram preconditions") {
  CHECK_THROWS_AS(ncgp::gram(ncgp::RbfKernel{}, ncgp::uniform_grid(5), 2), ncgp::DimensionError);
  CHECK_THROWS_AS(ncgp::gram(ncgp::NCurveKernel{oracle::p1_curve()}, ncgp::uniform_grid(5), 2),
                  ncgp::DimensionError);
  const auto rbf = ncgp::gram(ncgp::RbfKernel{1.0, 0.25}, ncgp::uniform_grid(20), 1);
  CHECK(rbf.dist.mean().isZero(0.0));
  for (Index i = 0; i < 20; ++i) CHECK(rbf.dist.cov()(i, i) == 1.0);
}

TEST_CASE("normalized P1 gram equals the normalized linear gram") {
  const auto grid = ncgp::uniform_grid(20);
  const auto a = ncgp::normalize_minmax(ncgp::gram(ncgp::NCurveKernel{oracle::p1_curve()}, grid, 1).dist.cov());
  const auto b = ncgp::normalize_minmax(ncgp::gram(ncgp::LinearKernel{0.5, 0.5, 0.5}, grid, 1).dist.cov());
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(a.minCoeff() == 0.0);
  CHECK(a.maxCoeff() == 1.0);
  CHECK(ncgp::normalize_minmax(Eigen::MatrixXd::Constant(3, 3, 2.0)).isZero(0.0));
}

TEST_CASE("prior samples") {
  const NCurve fixed({scalar(1, 0), scalar(3, 0)});
  const auto grid = ncgp::uniform_grid(5);
  const auto det = ncgp::gram(ncgp::NCurveKernel{fixed}, grid, 1);
  for (const auto& s : ncgp::sample_prior(det, 7, 4)) {
    REQUIRE(s.rows() == 5);
    for (Index j = 0; j < 5; ++j) CHECK(s(j, 0) == doctest::Approx(1.0 + 2.0 * grid[j]));
  }

  const auto p2 = ncgp::gram(ncgp::NCurveKernel{oracle::p2_curve()}, ncgp::uniform_grid(20), 1);
  const auto draws = ncgp::sample_prior(p2, 12345, 1000);
  int inside = 0;
  for (const auto& s : draws) {
    for (Index j = 0; j < 20; ++j) inside += std::abs(s(j, 0)) <= 2.0 * std::sqrt(p2.dist.cov()(j, j));
  }
  CHECK(inside >= 0.95 * 20000);

  const auto again = ncgp::sample_prior(p2, 12345, 1000);
  for (std::size_t i = 0; i < draws.size(); ++i) REQUIRE(draws[i] == again[i]);
}

TEST_CASE("csv export") {
  const auto grid = ncgp::uniform_grid(3);
  const auto g = ncgp::gram(ncgp::RbfKernel{}, grid, 1);
  std::ostringstream out;
  ncgp::write_gram_csv(out, grid, 1, g.dist.cov());
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "0,0.5,1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);

  std::ostringstream s;
  ncgp::write_samples_csv(s, grid, ncgp::sample_prior(g, 1, 2));
  CHECK(s.str().rfind("sample,step,t,dim0\n", 0) == 0);
}

}  // TEST_SUITE
