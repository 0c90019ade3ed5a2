#include <doctest.h>

#include <cmath>
#include <random>

#include "ncgp/errors.hpp"
#include "ncgp/mixture.hpp"
#include "support/oracles.hpp"

using ncgp::GaussianDist;
using ncgp::Index;
using ncgp::IndexPartition;
using ncgp::JointGaussian;
using ncgp::JointMixture;
using ncgp::NCurve;
using ncgp::NCurveMixture;

namespace {

GaussianDist scalar(double mean, double var) {
  return GaussianDist::diagonal(Eigen::VectorXd::Constant(1, mean), Eigen::VectorXd::Constant(1, var));
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

/// Mixture over grid {0, 1} with 1-D components given directly as joints.
JointMixture two_step(std::vector<double> weights, std::vector<GaussianDist> joints) {
  JointMixture jm;
  jm.weights = std::move(weights);
  for (auto& g : joints) jm.components.push_back(JointGaussian{ncgp::uniform_grid(2), std::move(g), 1});
  jm.steps = {0, 1};
  return jm;
}

double mixture_density(const ncgp::MixtureMarginal& m, const Eigen::VectorXd& x) {
  double p = 0.0;
  for (std::size_t k = 0; k < m.weights.size(); ++k) p += m.weights[k] * std::exp(ncgp::log_pdf(m.components[k], x));
  return p;
}

NCurveMixture random_mixture(int k, int degree, Index d, std::mt19937_64& rng) {
  std::vector<NCurve> curves;
  std::vector<double> w;
  std::uniform_real_distribution<double> u(0.1, 1.0);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    curves.push_back(oracle::random_curve(degree, d, rng));
    w.push_back(u(rng));
    total += w.back();
  }
  for (double& x : w) x /= total;
  return NCurveMixture(w, curves);
}

}  // namespace

TEST_SUITE("mixture") {

TEST_CASE("model validation") {
  const auto c = oracle::p1_curve();
  CHECK_THROWS(NCurveMixture({0.5, 0.6}, {c, c}));
  CHECK_THROWS(NCurveMixture({-0.1, 1.1}, {c, c}));
  CHECK_THROWS(NCurveMixture({1.0}, {c, c}));
  const NCurve cubic({scalar(0, 1), scalar(0, 1), scalar(0, 1), scalar(0, 1)});
  CHECK_THROWS(NCurveMixture({0.5, 0.5}, {c, cubic}));
  CHECK_NOTHROW(NCurveMixture({0.5, 0.5 + 1e-10}, {c, c}));
}

TEST_CASE("mixture_prior") {
  std::mt19937_64 rng(1);
  const auto grid = ncgp::uniform_grid(6);
  const auto m1 = random_mixture(1, 3, 2, rng);
  const auto p1 = ncgp::mixture_prior(m1, grid);
  const auto ref = ncgp::gram(ncgp::NCurveKernel{m1.curves()[0]}, grid, 2);
  CHECK(p1.weights == std::vector<double>{1.0});
  CHECK(p1.components[0].dist.cov() == ref.dist.cov());
  CHECK(p1.steps == std::vector<int>{0, 1, 2, 3, 4, 5});

  const auto c = oracle::random_curve(2, 1, rng);
  const auto twin = ncgp::mixture_prior(NCurveMixture({0.3, 0.7}, {c, c}), grid);
  const auto solo = ncgp::mixture_prior(NCurveMixture({1.0}, {c}), grid);
  const Eigen::VectorXd x = oracle::random_vector(6, rng, 3.0);
  CHECK(ncgp::mixture_log_likelihood(twin, x) == doctest::Approx(ncgp::mixture_log_likelihood(solo, x)).epsilon(1e-12));

  // Law of total variance for two separated modes.
  const NCurve lo({scalar(-5, 1), scalar(-5, 1)});
  const NCurve hi({scalar(5, 1), scalar(5, 1)});
  const auto sep = ncgp::mixture_prior(NCurveMixture({0.5, 0.5}, {lo, hi}), grid);
  const auto marg = ncgp::mixture_marginal(sep, 2);
  double total = 0.0;
  const double mean = marg.mean()(0);
  for (std::size_t k = 0; k < 2; ++k) {
    const double mk = marg.components[k].mean()(0);
    total += marg.weights[k] * (marg.components[k].cov()(0, 0) + (mk - mean) * (mk - mean));
  }
  for (const auto& comp : marg.components) CHECK(total > comp.cov()(0, 0));
  CHECK(total == doctest::Approx(marg.components[0].cov()(0, 0) + 25.0));
}

TEST_CASE("mixture_condition examples") {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd cov = oracle::random_spd(2, rng);
  const auto single = two_step({1.0}, {GaussianDist(vec({0.5, -1}), cov)});
  const auto part = IndexPartition::from_observed({1}, 2);
  const auto post = ncgp::mixture_condition(single, part, vec({0.7}));
  CHECK(post.weights == std::vector<double>{1.0});
  const auto direct = ncgp::condition(single.components[0].dist, part, vec({0.7}));
  CHECK(post.components[0].dist.mean() == direct.mean());
  CHECK(post.components[0].dist.cov() == direct.cov());
  CHECK(post.steps == std::vector<int>{0});
  REQUIRE(post.observation_at(1) != nullptr);
  CHECK((*post.observation_at(1))(0) == 0.7);
  CHECK(!post.position_of(1));
  CHECK(*post.position_of(0) == 0);

  const auto sep = two_step({0.5, 0.5}, {GaussianDist(vec({0, -5}), Eigen::MatrixXd::Identity(2, 2)),
                                         GaussianDist(vec({0, 5}), Eigen::MatrixXd::Identity(2, 2))});
  const auto decisive = ncgp::mixture_condition(sep, part, vec({-5}));
  CHECK(decisive.weights[0] >= 0.99);
  CHECK(ncgp::ml_component(decisive) == 0);

  const auto even = ncgp::mixture_condition(sep, part, vec({0}));
  CHECK(even.weights[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(even.weights[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("weight floor clamps vanishing weights to zero") {
  const auto sep = two_step({0.5, 0.5}, {GaussianDist(vec({0, -50}), Eigen::MatrixXd::Identity(2, 2)),
                                         GaussianDist(vec({0, 50}), Eigen::MatrixXd::Identity(2, 2))});
  const auto post = ncgp::mixture_condition(sep, IndexPartition::from_observed({1}, 2), vec({-50}));
  CHECK(post.weights[0] == 1.0);
  CHECK(post.weights[1] == 0.0);
}

TEST_CASE("Bayes consistency against direct joint densities") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<GaussianDist> comps;
    for (int k = 0; k < 2; ++k) comps.emplace_back(oracle::random_vector(2, rng, 2.0), oracle::random_spd(2, rng, 0.3));
    const double w0 = u(rng);
    const auto jm = two_step({w0, 1.0 - w0}, comps);
    const double y = oracle::random_vector(1, rng, 2.0)(0);
    const auto post = ncgp::mixture_condition(jm, IndexPartition::from_observed({1}, 2), vec({y}));
    const auto marg = ncgp::mixture_marginal(post, 0);
    for (double z : {-1.5, 0.0, 0.8}) {
      double joint = 0.0, evidence = 0.0;
      for (int k = 0; k < 2; ++k) {
        const auto& g = comps[static_cast<std::size_t>(k)];
        joint += jm.weights[k] * std::exp(oracle::log_pdf(g.mean(), g.cov(), vec({z, y})));
        evidence += jm.weights[k] * std::exp(oracle::log_pdf(g.mean().tail(1), g.cov().block(1, 1, 1, 1), vec({y})));
      }
      CHECK(std::abs(mixture_density(marg, vec({z})) - joint / evidence) < 1e-8);
    }
  }
}

TEST_CASE("posterior weights form a simplex and follow component order") {
  std::mt19937_64 rng(4);
  const auto grid = ncgp::uniform_grid(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = random_mixture(3, 3, 2, rng);
    const auto prior = ncgp::mixture_prior(m, grid);
    const auto part = IndexPartition::from_observed({2, 3}, 10);
    const Eigen::VectorXd obs = oracle::random_vector(2, rng, 3.0);
    const auto post = ncgp::mixture_condition(prior, part, obs, 0.05);
    double sum = 0.0;
    for (double w : post.weights) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<std::size_t> perm{2, 0, 1};
    JointMixture shuffled = prior;
    for (std::size_t i = 0; i < 3; ++i) {
      shuffled.weights[i] = prior.weights[perm[i]];
      shuffled.components[i] = prior.components[perm[i]];
    }
    const auto post2 = ncgp::mixture_condition(shuffled, part, obs, 0.05);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(post2.weights[i] == doctest::Approx(post.weights[perm[i]]).epsilon(1e-13));
      CHECK(post2.components[i].dist.mean() == post.components[perm[i]].dist.mean());
      CHECK(post2.components[i].dist.cov() == post.components[perm[i]].dist.cov());
    }
  }
}

TEST_CASE("empty observation set is the identity") {
  std::mt19937_64 rng(5);
  const auto prior = ncgp::mixture_prior(random_mixture(2, 2, 2, rng), ncgp::uniform_grid(4));
  const auto post = ncgp::mixture_condition(prior, IndexPartition::from_observed({}, 8), Eigen::VectorXd(0));
  CHECK(post.weights == prior.weights);
  for (std::size_t k = 0; k < 2; ++k) CHECK(post.components[k].dist.cov() == prior.components[k].dist.cov());
  CHECK(post.steps == prior.steps);
}

TEST_CASE("partial-step observations are rejected") {
  std::mt19937_64 rng(6);
  const auto prior = ncgp::mixture_prior(random_mixture(2, 2, 2, rng), ncgp::uniform_grid(4));
  CHECK_THROWS_AS(ncgp::mixture_condition(prior, IndexPartition::from_observed({3}, 8), vec({1})),
                  ncgp::InvalidArgument);
}

TEST_CASE("non-PSD failures name the component") {
  Eigen::MatrixXd bad(2, 2);
  bad << -1.0, 0.0, 0.0, -1.0;
  auto jm = two_step({0.5, 0.5}, {GaussianDist(vec({0, 0}), Eigen::MatrixXd::Identity(2, 2)),
                                  GaussianDist(vec({0, 0}), bad)});
  try {
    ncgp::mixture_condition(jm, IndexPartition::from_observed({1}, 2), vec({0}));
    FAIL("expected NonPSDCovariance");
  } catch (const ncgp::NonPSDCovariance& e) {
    CHECK(std::string(e.what()).find("component 1") != std::string::npos);
  }
}

TEST_CASE("mixture_marginal and log likelihood") {
  std::mt19937_64 rng(7);
  const auto m = random_mixture(3, 4, 2, rng);
  const auto prior = ncgp::mixture_prior(m, ncgp::uniform_grid(5));
  const auto marg = ncgp::mixture_marginal(prior, 3);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(2);
  for (std::size_t k = 0; k < 3; ++k) expected += m.weights()[k] * ncgp::curve_point(m.curves()[k], 0.75).mean();
  CHECK((marg.mean() - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(ncgp::mixture_marginal(prior, 5), ncgp::IndexOutOfRange);

  const Eigen::VectorXd x = oracle::random_vector(10, rng, 3.0);
  const double ll = ncgp::mixture_log_likelihood(prior, x);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(ll >= std::log(prior.weights[k]) + ncgp::log_pdf(prior.components[k].dist, x) - 1e-12);
  }
  const auto solo = ncgp::mixture_prior(NCurveMixture({1.0}, {m.curves()[0]}), ncgp::uniform_grid(5));
  CHECK(ncgp::mixture_log_likelihood(solo, x) ==
        doctest::Approx(ncgp::log_pdf(solo.components[0].dist, x)).epsilon(1e-13));
  CHECK_THROWS(ncgp::mixture_log_likelihood(prior, oracle::random_vector(9, rng)));

  const auto single_step = ncgp::mixture_prior(m, ncgp::TimeGrid({0.4}));
  const auto mm = ncgp::mixture_marginal(single_step, 0);
  CHECK(mm.components[1].cov() == single_step.components[1].dist.cov());
}

TEST_CASE("ml_component") {
  JointMixture jm = two_step({0.2, 0.5, 0.3}, {scalar(0, 1), scalar(0, 1), scalar(0, 1)});
  CHECK(ncgp::ml_component(jm) == 1);
  jm.weights = {0.5, 0.5, 0.0};
  CHECK(ncgp::ml_component(jm) == 0);
}

TEST_CASE("model json round trip") {
  std::mt19937_64 rng(8);
  const auto m = random_mixture(3, 4, 2, rng);
  const std::string text = ncgp::to_model_json(m);
  const auto back = ncgp::parse_model_json(text);
  CHECK(ncgp::to_model_json(back) == text);
  CHECK(back.weights() == m.weights());
  for (std::size_t k = 0; k < 3; ++k) {
    for (int l = 0; l <= 4; ++l) {
      CHECK(back.curves()[k].control_point(l).mean() == m.curves()[k].control_point(l).mean());
      CHECK(back.curves()[k].control_point(l).cov() == m.curves()[k].control_point(l).cov());
    }
  }
  CHECK(text.find("\"ncgp-1\"") != std::string::npos);
}

TEST_CASE("model json errors") {
  CHECK_THROWS_AS(ncgp::parse_model_json("{"), ncgp::ParseError);
  CHECK_THROWS_AS(ncgp::parse_model_json(R"({"version":"ncgp-0"})"), ncgp::ParseError);
  std::mt19937_64 rng(9);
  auto doc = ncgp::to_model_json(random_mixture(2, 1, 1, rng));
  const auto pos = doc.find("\"K\": 2");
  REQUIRE(pos != std::string::npos);
  doc.replace(pos, 6, "\"K\": 3");
  CHECK_THROWS_AS(ncgp::parse_model_json(doc), ncgp::ParseError);
  CHECK_THROWS_AS(ncgp::load_model("/nonexistent/model.json"), ncgp::IoError);
}

}  // TEST_SUITE
