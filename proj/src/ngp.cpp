#include "ncgp/ngp.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "ncgp/errors.hpp"
#include "ncgp/format.hpp"

namespace ncgp {

namespace {

// Expanded closed form of cov(X_ti, X_tj) given the basis values at ti and tj:
//   -mu_X mu_Y^T + sum_l bi_l bj_l (S_l + mu_l mu_l^T)
//   + sum_l sum_{l' != l} bi_l bj_l' mu_l mu_l'^T
Eigen::MatrixXd ncurve_block(const NCurve& c, const Eigen::VectorXd& bi, const Eigen::VectorXd& bj) {
  const Index d = c.dim();
  const int degree = c.degree();
  Eigen::VectorXd mu_x = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd mu_y = Eigen::VectorXd::Zero(d);
  for (int l = 0; l <= degree; ++l) {
    mu_x += bi(l) * c.control_point(l).mean();
    mu_y += bj(l) * c.control_point(l).mean();
  }
  Eigen::MatrixXd k = -mu_x * mu_y.transpose();
  for (int l = 0; l <= degree; ++l) {
    const auto& p = c.control_point(l);
    k += (bi(l) * bj(l)) * (p.cov() + p.mean() * p.mean().transpose());
  }
  for (int l = 0; l <= degree; ++l) {
    for (int lp = 0; lp <= degree; ++lp) {
      if (lp == l) continue;
      k += (bi(l) * bj(lp)) * (c.control_point(l).mean() * c.control_point(lp).mean().transpose());
    }
  }
  return k;
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string(name) + " must be > 0");
  }
}

// Per-grid-point precomputation shared by the serial and parallel assemblers.
struct GramPlan {
  const KernelSpec* spec;
  const TimeGrid* grid;
  Index d;
  std::vector<Eigen::VectorXd> basis;  // ncurve only
  Eigen::VectorXd mean;

  Eigen::MatrixXd block(std::size_t i, std::size_t j) const {
    const double ti = (*grid)[i];
    const double tj = (*grid)[j];
    if (const auto* nc = std::get_if<NCurveKernel>(spec)) {
      return ncurve_block(nc->curve, basis[i], basis[j]);
    }
    Eigen::MatrixXd k(1, 1);
    if (const auto* rbf = std::get_if<RbfKernel>(spec)) {
      k(0, 0) = rbf_kernel(*rbf, ti, tj);
    } else {
      k(0, 0) = linear_kernel(std::get<LinearKernel>(*spec), ti, tj);
    }
    return k;
  }
};

GramPlan make_plan(const KernelSpec& spec, const TimeGrid& grid, Index d) {
  validate(spec);
  GramPlan plan{&spec, &grid, d, {}, {}};
  if (const auto* nc = std::get_if<NCurveKernel>(&spec)) {
    if (nc->curve.dim() != d) {
      throw DimensionError("ncurve kernel has dimension " + std::to_string(nc->curve.dim()) +
                           ", requested " + std::to_string(d));
    }
    plan.basis.reserve(grid.size());
    for (double t : grid.values()) plan.basis.push_back(bernstein_all(nc->curve.degree(), t));
    plan.mean = mean_vector(nc->curve, grid);
  } else {
    if (d != 1) throw DimensionError("reference kernels are univariate; requested d = " +
                                     std::to_string(d));
    plan.mean = Eigen::VectorXd::Zero(static_cast<Index>(grid.size()));
  }
  return plan;
}

void fill_block(const GramPlan& plan, Eigen::MatrixXd& cov, std::size_t i, std::size_t j) {
  const Index d = plan.d;
  const Eigen::MatrixXd k = plan.block(i, j);
  const Index ri = static_cast<Index>(i) * d;
  const Index rj = static_cast<Index>(j) * d;
  cov.block(ri, rj, d, d) = k;
  if (i != j) cov.block(rj, ri, d, d) = k.transpose();
}

JointGaussian finish(const GramPlan& plan, const TimeGrid& grid, Eigen::MatrixXd cov) {
  return JointGaussian{grid, GaussianDist(plan.mean, std::move(cov)), plan.d};
}

}  // namespace

GaussianDist JointGaussian::step_marginal(std::size_t pos) const {
  if (pos >= grid.size()) {
    throw IndexOutOfRange("step " + std::to_string(pos) + " outside grid of " +
                          std::to_string(grid.size()));
  }
  const Index start = static_cast<Index>(pos) * d;
  return GaussianDist(dist.mean().segment(start, d), dist.cov().block(start, start, d, d));
}

void validate(const KernelSpec& spec) {
  if (const auto* rbf = std::get_if<RbfKernel>(&spec)) {
    check_positive(rbf->sigma, "rbf sigma");
    check_positive(rbf->length_scale, "rbf length scale");
  } else if (const auto* lin = std::get_if<LinearKernel>(&spec)) {
    check_positive(lin->sigma, "linear sigma");
    if (!(lin->sigma_b >= 0.0)) throw InvalidArgument("linear sigma_b must be >= 0");
    if (!std::isfinite(lin->c)) throw InvalidArgument("linear c must be finite");
  }
}

double kernel_univariate(const NCurve& c, double ti, double tj) {
  if (c.dim() != 1) {
    throw DimensionError("kernel_univariate needs a 1-D curve, got d = " + std::to_string(c.dim()));
  }
  const int degree = c.degree();
  const Eigen::VectorXd bi = bernstein_all(degree, ti);
  const Eigen::VectorXd bj = bernstein_all(degree, tj);
  double mu_x = 0.0;
  double mu_y = 0.0;
  for (int l = 0; l <= degree; ++l) {
    mu_x += bi(l) * c.control_point(l).mean()(0);
    mu_y += bj(l) * c.control_point(l).mean()(0);
  }
  double k = 0.0;
  for (int l = 0; l <= degree; ++l) {
    const double mu = c.control_point(l).mean()(0);
    const double var = c.control_point(l).cov()(0, 0);
    k += bi(l) * bj(l) * (var + mu * mu);
  }
  for (int l = 0; l <= degree; ++l) {
    for (int lp = 0; lp <= degree; ++lp) {
      if (lp == l) continue;
      k += bi(l) * bj(lp) * c.control_point(l).mean()(0) * c.control_point(lp).mean()(0);
    }
  }
  return k - mu_x * mu_y;
}

Eigen::MatrixXd kernel_matrix(const NCurve& c, double ti, double tj) {
  return ncurve_block(c, bernstein_all(c.degree(), ti), bernstein_all(c.degree(), tj));
}

double rbf_kernel(const RbfKernel& k, double ti, double tj) {
  const double diff = ti - tj;
  return k.sigma * k.sigma * std::exp(-(diff * diff) / (2.0 * k.length_scale * k.length_scale));
}

double linear_kernel(const LinearKernel& k, double ti, double tj) {
  return k.sigma_b * k.sigma_b + k.sigma * k.sigma * (ti - k.c) * (tj - k.c);
}

Eigen::VectorXd mean_vector(const NCurve& c, const TimeGrid& grid) {
  const Index d = c.dim();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Index>(grid.size()) * d);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Eigen::VectorXd b = bernstein_all(c.degree(), grid[j]);
    auto seg = m.segment(static_cast<Index>(j) * d, d);
    for (int l = 0; l <= c.degree(); ++l) seg += b(l) * c.control_point(l).mean();
  }
  return m;
}

JointGaussian gram(const KernelSpec& spec, const TimeGrid& grid, Index d) {
  const GramPlan plan = make_plan(spec, grid, d);
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  Eigen::MatrixXd cov(n * d, n * d);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = i; j < n; ++j) {
      fill_block(plan, cov, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return finish(plan, grid, std::move(cov));
}

JointGaussian gram_serial(const KernelSpec& spec, const TimeGrid& grid, Index d) {
  const GramPlan plan = make_plan(spec, grid, d);
  const std::size_t n = grid.size();
  Eigen::MatrixXd cov(static_cast<Index>(n) * d, static_cast<Index>(n) * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) fill_block(plan, cov, i, j);
  }
  return finish(plan, grid, std::move(cov));
}

Eigen::MatrixXd normalize_minmax(const Eigen::MatrixXd& g) {
  const double lo = g.minCoeff();
  const double hi = g.maxCoeff();
  if (!(hi > lo)) return Eigen::MatrixXd::Zero(g.rows(), g.cols());
  return (g.array() - lo) / (hi - lo);
}

std::vector<Eigen::MatrixXd> sample_prior(const JointGaussian& j, std::uint64_t seed,
                                          std::size_t n) {
  const auto flat = sample(j.dist, seed, n);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(n);
  const Index steps = static_cast<Index>(j.steps());
  for (const auto& v : flat) {
    // Flat layout is time-major, so a row-major (steps x d) view is exact.
    out.emplace_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                    Eigen::RowMajor>>(v.data(), steps, j.d));
  }
  return out;
}

void write_gram_csv(std::ostream& out, const TimeGrid& grid, Index d, const Eigen::MatrixXd& m) {
  for (Index c = 0; c < m.cols(); ++c) {
    if (c > 0) out << ',';
    out << format_double(grid[static_cast<std::size_t>(c / d)]);
  }
  out << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

void write_samples_csv(std::ostream& out, const TimeGrid& grid,
                       const std::vector<Eigen::MatrixXd>& samples) {
  const Index d = samples.empty() ? 1 : samples.front().cols();
  out << "sample,step,t";
  for (Index k = 0; k < d; ++k) out << ",dim" << k;
  out << '\n';
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (Index j = 0; j < samples[s].rows(); ++j) {
      out << s << ',' << j << ',' << format_double(grid[static_cast<std::size_t>(j)]);
      for (Index k = 0; k < d; ++k) out << ',' << format_double(samples[s](j, k));
      out << '\n';
    }
  }
}

}  // namespace ncgp
