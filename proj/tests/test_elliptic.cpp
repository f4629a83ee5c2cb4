#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "subdiff/elliptic.hpp"

using namespace subdiff;
using Catch::Approx;

namespace {

DomainSpec interval(int nx) {
  DomainSpec d;
  d.dimension = 1;
  d.x_min = 0.0;
  d.x_max = std::numbers::pi;
  d.nx = nx;
  return d;
}

DomainSpec unit_square(int n) {
  DomainSpec d;
  d.dimension = 2;
  d.x_min = d.y_min = 0.0;
  d.x_max = d.y_max = std::numbers::pi;
  d.nx = d.ny = n;
  return d;
}

}  // namespace

TEST_CASE("assemble: textbook stencil for unit coefficients") {
  const DomainSpec dom = interval(17);
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const double ih2 = 1.0 / (dom.hx() * dom.hx());
  const Eigen::MatrixXd K(op.stiffness());
  CHECK(K(3, 3) == Approx(2.0 * ih2).epsilon(1e-14));
  CHECK(K(3, 4) == Approx(-ih2).epsilon(1e-14));
  CHECK(K(4, 3) == Approx(-ih2).epsilon(1e-14));
  CHECK(K(3, 5) == 0.0);
}

TEST_CASE("assemble: operator identities on the spectrum") {
  const DomainSpec dom = interval(65);
  const auto base = eigensystem(assemble(dom, CoefficientField::constant(dom)), 6);

  // q -> q + 1 shifts every eigenvalue by exactly 1 (rho = 1)
  CoefficientField shifted = CoefficientField::constant(dom, 1.0, 1.0, 1.0);
  const auto es = eigensystem(assemble(dom, shifted), 6);
  for (int g = 0; g < 6; ++g) {
    CHECK(es.eigenvalues[g] - base.eigenvalues[g] == Approx(1.0).epsilon(1e-12));
  }

  // a -> 4a scales the spectrum by 4
  CoefficientField scaled = CoefficientField::constant(dom, 4.0, 0.0, 1.0);
  const auto es4 = eigensystem(assemble(dom, scaled), 6);
  for (int g = 0; g < 6; ++g) {
    CHECK(es4.eigenvalues[g] / base.eigenvalues[g] == Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("assemble rejects inadmissible coefficients") {
  const DomainSpec dom = interval(17);
  CoefficientField cf = CoefficientField::constant(dom);
  cf.a11[5] = 0.0;
  CHECK_THROWS_AS(assemble(dom, cf), coefficient_error);
  CHECK_THROWS_WITH(assemble(dom, cf),
                    Catch::Matchers::ContainsSubstring("node 5"));

  cf = CoefficientField::constant(dom);
  cf.q[3] = -0.1;
  CHECK_THROWS_AS(assemble(dom, cf), coefficient_error);

  cf = CoefficientField::constant(dom);
  cf.rho[7] = 0.0;
  CHECK_THROWS_AS(assemble(dom, cf), coefficient_error);

  const DomainSpec sq = unit_square(17);
  CoefficientField cf2 = CoefficientField::constant(sq);
  cf2.a12[40] = 0.2;
  CHECK_THROWS_AS(assemble(sq, cf2), coefficient_error);
}

TEST_CASE("eigensystem: Dirichlet sine modes on (0, pi)") {
  const DomainSpec dom = interval(257);
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const auto eig = eigensystem(op, 8);
  const double h = dom.hx();
  for (int n = 1; n <= 8; ++n) {
    // exact discrete eigenvalue of the 3-point stencil
    const double lam_h = 4.0 / (h * h) * std::pow(std::sin(n * h / 2.0), 2);
    CHECK(eig.eigenvalues[n - 1] == Approx(lam_h).epsilon(1e-9));
    CHECK(std::abs(eig.eigenvalues[n - 1] - n * n) <= 0.1);
    CHECK(eig.multiplicities[n - 1] == 1);
  }
  // eigenvectors match sqrt(2/pi) sin(n x) on the grid
  const double c = std::sqrt(2.0 / std::numbers::pi);
  for (int n = 1; n <= 3; ++n) {
    double worst = 0.0;
    for (int i = 0; i < dom.nx; ++i) {
      worst = std::max(worst, std::abs(eig.modes(i, n - 1) -
                                       c * std::sin(n * dom.x(i))));
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("eigensystem: tensor modes and multiplicity on the square") {
  const DomainSpec dom = unit_square(33);
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const auto eig = eigensystem(op, 8);
  // groups: 2, 5 (double), 8, 10 (double), ...
  CHECK(eig.multiplicities[0] == 1);  // (1,1)
  CHECK(std::abs(eig.eigenvalues[0] - 2.0) <= 0.05);
  CHECK(eig.multiplicities[1] == 2);  // (1,2) and (2,1)
  CHECK(std::abs(eig.eigenvalues[1] - 5.0) <= 0.1);
}

TEST_CASE("eigensystem: rho-orthonormality under random weight") {
  const DomainSpec dom = interval(129);
  CoefficientField cf = CoefficientField::constant(dom);
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> ud(1.0, 2.0);
  for (int i = 0; i < dom.nx; ++i) cf.rho[i] = ud(rng);
  const auto op = assemble(dom, cf);
  const auto eig = eigensystem(op, 10);
  double worst = 0.0;
  for (int a = 0; a < 10; ++a) {
    for (int b = 0; b < 10; ++b) {
      const double g = op.weighted_inner(eig.modes.col(a), eig.modes.col(b));
      worst = std::max(worst, std::abs(g - (a == b ? 1.0 : 0.0)));
    }
  }
  CHECK(worst <= 1e-8);

  // residual ||A phi - lambda phi|| <= 1e-8 ||phi||
  for (int c = 0; c < 10; ++c) {
    const Eigen::VectorXd r =
        op.apply(eig.modes.col(c)) - eig.lambda_of_column(c) * eig.modes.col(c);
    CHECK(op.weighted_norm(r) <= 1e-8 * op.weighted_norm(eig.modes.col(c)));
  }

  // lambda_1 > 0 for admissible coefficients
  CHECK(eig.eigenvalues[0] > 0.0);
}

TEST_CASE("eigenvalue convergence rate is O(h^2)") {
  auto lam1 = [](int nx) {
    const DomainSpec d = interval(nx);
    return eigensystem(assemble(d, CoefficientField::constant(d)), 2)
        .eigenvalues[0];
  };
  const double r = (lam1(65) - 1.0) / (lam1(129) - 1.0);
  CHECK(r >= 3.5);
  CHECK(r <= 4.5);
}

TEST_CASE("weighted_inner: normalization, orthogonality, sin^2 integral") {
  const DomainSpec dom = interval(129);
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const auto eig = eigensystem(op, 4);
  CHECK(op.weighted_inner(eig.modes.col(0), eig.modes.col(0)) ==
        Approx(1.0).margin(1e-8));
  CHECK(op.weighted_inner(eig.modes.col(0), eig.modes.col(1)) ==
        Approx(0.0).margin(1e-8));

  Eigen::VectorXd s(dom.nx);
  for (int i = 0; i < dom.nx; ++i) s[i] = std::sin(dom.x(i));
  CHECK(op.weighted_inner(s, s) ==
        Approx(std::numbers::pi / 2.0).epsilon(1e-12));

  Eigen::VectorXd wrong(5);
  CHECK_THROWS_AS(op.weighted_inner(s, wrong), std::invalid_argument);
}

TEST_CASE("self-adjointness in the weighted inner product") {
  const DomainSpec dom = interval(129);
  CoefficientField cf = CoefficientField::constant(dom);
  for (int i = 0; i < dom.nx; ++i) {
    cf.a11[i] = 1.0 + 0.4 * std::sin(dom.x(i));
    cf.rho[i] = 1.2 + 0.3 * std::cos(dom.x(i));
    cf.q[i] = 0.1 * dom.x(i);
  }
  const auto op = assemble(dom, cf);
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(dom.nx);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dom.nx);
    for (int i = 1; i < dom.nx - 1; ++i) {
      u[i] = nd(rng);
      v[i] = nd(rng);
    }
    const double lhs = op.weighted_inner(op.apply(u), v);
    const double rhs = op.weighted_inner(u, op.apply(v));
    CHECK(std::abs(lhs - rhs) <=
          1e-10 * op.weighted_norm(u) * op.weighted_norm(v));
  }
}

TEST_CASE("conormal_trace: closed-form sine modes") {
  const DomainSpec dom = interval(257);
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const auto eig = eigensystem(op, 4);
  const double c = std::sqrt(2.0 / std::numbers::pi);
  for (int n = 1; n <= 4; ++n) {
    const auto left =
        conormal_trace(op, eig.modes.col(n - 1), BoundarySubset::left(dom));
    const auto right =
        conormal_trace(op, eig.modes.col(n - 1), BoundarySubset::right(dom));
    // outward normal at 0 is -1: trace = -phi'(0) = -c*n
    CHECK(left[0] == Approx(-c * n).epsilon(2e-3));
    // at pi: trace = phi'(pi) = c*n*cos(n pi) = (-1)^n c n
    CHECK(right[0] == Approx((n % 2 == 0 ? 1.0 : -1.0) * c * n).epsilon(2e-3));
  }

  // O(h^2) convergence of the one-sided trace
  auto trace_err = [&](int nx) {
    const DomainSpec d = interval(nx);
    const auto o = assemble(d, CoefficientField::constant(d));
    const auto e = eigensystem(o, 2);
    const auto t = conormal_trace(o, e.modes.col(0), BoundarySubset::left(d));
    return std::abs(t[0] + c);
  };
  const double ratio = trace_err(65) / trace_err(129);
  CHECK(ratio >= 3.0);
  CHECK(ratio <= 5.0);
}

TEST_CASE("conormal_trace: 2D edge mode") {
  const DomainSpec dom = unit_square(33);
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const auto eig = eigensystem(op, 4);
  // group 2 holds the degenerate pair spanned by sin(x)sin(2y), sin(2x)sin(y)
  const int c0 = eig.first_column_of_group(1);
  const auto gamma = BoundarySubset::left(dom);
  const auto tr = conormal_trace(op, eig.modes.col(c0), gamma);
  // trace on x=0 of a*sin(x)sin(2y) + b*sin(2x)sin(y) is
  // -(a sin(2y) + 2 b sin(y)) * (2/pi); fit (a, b) and compare pointwise
  Eigen::MatrixXd B(gamma.nodes.size(), 2);
  for (std::size_t r = 0; r < gamma.nodes.size(); ++r) {
    const double y = dom.y(gamma.nodes[r]);
    B(static_cast<Eigen::Index>(r), 0) =
        -(2.0 / std::numbers::pi) * std::sin(2.0 * y);
    B(static_cast<Eigen::Index>(r), 1) =
        -(2.0 / std::numbers::pi) * 2.0 * std::sin(y);
  }
  const Eigen::Vector2d ab = B.colPivHouseholderQr().solve(tr);
  CHECK((B * ab - tr).norm() <= 2e-2 * tr.norm());
}

TEST_CASE("apply_inverse_power: eigenvector action and edge cases") {
  const DomainSpec dom = interval(129);
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const auto eig = eigensystem(op, 4);

  const Eigen::VectorXd r2 =
      apply_inverse_power(op, 2, eig.modes.col(0)) -
      eig.modes.col(0) / std::pow(eig.eigenvalues[0], 2);
  CHECK(op.weighted_norm(r2) <= 1e-10);

  CHECK(apply_inverse_power(op, 3, Eigen::VectorXd::Zero(dom.nx)).norm() ==
        0.0);

  // g = -sin: eigenfunction with lambda_1 ~ 1, so A^{-2} g ~ g
  Eigen::VectorXd g(dom.nx);
  for (int i = 0; i < dom.nx; ++i) g[i] = -std::sin(dom.x(i));
  const Eigen::VectorXd w = apply_inverse_power(op, 2, g);
  CHECK(op.weighted_norm(w - g) <= 1e-3 * op.weighted_norm(g));

  // inverse followed by the operator returns the input
  const Eigen::VectorXd u = op.apply(op.solve(g)) - g;
  double interior_err = 0.0;
  for (int i = 1; i < dom.nx - 1; ++i) {
    interior_err = std::max(interior_err, std::abs(u[i]));
  }
  CHECK(interior_err <= 1e-8 * op.weighted_norm(g));

  CHECK_THROWS_AS(apply_inverse_power(op, 0, g), std::invalid_argument);
}

TEST_CASE("solve_shifted: complex resolvent action on an eigenvector") {
  const DomainSpec dom = interval(65);
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const auto eig = eigensystem(op, 2);
  const std::complex<double> shift(0.25, 0.4);
  const Eigen::VectorXcd got =
      op.solve_shifted(shift, eig.modes.col(0).cast<std::complex<double>>());
  const Eigen::VectorXcd want =
      eig.modes.col(0).cast<std::complex<double>>() /
      (eig.eigenvalues[0] + shift);
  CHECK((got - want).norm() <= 1e-10 * want.norm());
}

TEST_CASE("fractional_norm: spectral values and Parseval") {
  const DomainSpec dom = interval(129);
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const auto eig = eigensystem(op, 120);

  CHECK(fractional_norm(eig.modes.col(0), 1.0, eig) ==
        Approx(eig.eigenvalues[0]).epsilon(1e-9));
  const Eigen::VectorXd mix = eig.modes.col(0) + eig.modes.col(1);
  CHECK(fractional_norm(mix, 0.0, eig) ==
        Approx(std::sqrt(2.0)).epsilon(1e-9));

  // smooth interior bump: s = 0 norm vs direct quadrature norm
  Eigen::VectorXd bump(dom.nx);
  for (int i = 0; i < dom.nx; ++i) {
    const double x = dom.x(i);
    bump[i] = std::exp(-4.0 * std::pow(x - 1.5, 2)) *
              std::pow(std::sin(x / 1.0 * std::numbers::pi /
                                std::numbers::pi),
                       2) *
              std::pow(std::sin(x), 2);
  }
  double tail = 0.0;
  const double spec_norm = fractional_norm(bump, 0.0, eig, &tail);
  CHECK(spec_norm == Approx(op.weighted_norm(bump)).epsilon(1e-6));

  // truncation warning when the basis is too short for the data
  const auto eig4 = eigensystem(op, 4);
  CHECK_THROWS_AS(fractional_norm(eig.modes.col(6), 0.0, eig4),
                  truncation_error);
}
