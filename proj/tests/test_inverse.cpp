#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "subdiff/inverse.hpp"

using namespace subdiff;
using Catch::Approx;

namespace {

struct Fixture {
  DomainSpec dom;
  DiscreteOperator op;
  EigenSystem eig;

  explicit Fixture(int nx = 129, int n_modes = 24)
      : dom(make_dom(nx)),
        op(assemble(dom, CoefficientField::constant(dom))),
        eig(eigensystem(op, n_modes)) {}

  static DomainSpec make_dom(int nx) {
    DomainSpec d;
    d.dimension = 1;
    d.x_min = 0.0;
    d.x_max = std::numbers::pi;
    d.nx = nx;
    return d;
  }

  Eigen::VectorXd f_from_weights(const std::vector<double>& w) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(dom.nx);
    for (std::size_t i = 0; i < w.size(); ++i) {
      f += w[i] * eig.modes.col(static_cast<Eigen::Index>(i));
    }
    return f.cwiseProduct(op.coeffs().rho);
  }
};

/// Synthetic IP1 data: flux on Gamma = {0} out to T_max with the eq2
/// convention (sigma extended by zero).
FluxTrace make_ip1_flux(const Fixture& fx, const SourceSpec& src,
                        double alpha, double T_max, double dt) {
  const TimeGrid grid{dt, static_cast<std::size_t>(std::llround(T_max / dt))};
  return flux_trace_modal(fx.eig, fx.op, alpha, src, grid,
                          BoundarySubset::left(fx.dom));
}

}  // namespace

TEST_CASE("IP1: noiseless mode-weight recovery (2, 0, -1)") {
  Fixture fx;
  const std::vector<double> truth = {2.0, 0.0, -1.0};
  SourceSpec src{fx.f_from_weights(truth), SigmaSpec::hat(0.2, 0.6), 1.0, 0.4};
  const double alpha = 0.5;
  const FluxTrace flux = make_ip1_flux(fx, src, alpha, 24.0, 4e-3);

  const TimeSeries sigma_known = src.sigma.sample(flux.grid);
  const ReconstructionResult res = reconstruct_space_source(
      flux, sigma_known, fx.eig, fx.op, alpha, 3, RegConfig{});

  double err = 0.0, scale = 0.0;
  for (int n = 0; n < 3; ++n) {
    err += std::pow(res.mode_weights[n] - truth[static_cast<std::size_t>(n)], 2);
    scale += truth[static_cast<std::size_t>(n)] * truth[static_cast<std::size_t>(n)];
  }
  const double rel = std::sqrt(err / scale);
  INFO("weights: " << res.mode_weights.head(3).transpose());
  CHECK(rel <= 1e-2);

  // f_hat itself reproduces f up to the same tolerance
  CHECK((res.f_hat - src.f).norm() <= 2e-2 * src.f.norm());
}

TEST_CASE("IP1: zero flux reconstructs the zero source") {
  Fixture fx;
  const TimeGrid grid{4e-3, 3000};
  FluxTrace flux;
  flux.boundary = BoundarySubset::left(fx.dom);
  flux.grid = grid;
  flux.values = Eigen::MatrixXd::Zero(1, grid.size());
  const TimeSeries sigma_known = SigmaSpec::hat(0.2, 0.6).sample(grid);
  const ReconstructionResult res = reconstruct_space_source(
      flux, sigma_known, fx.eig, fx.op, 0.5, 3, RegConfig{});
  CHECK(res.mode_weights.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(res.f_hat.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("IP1: 1% multiplicative noise with regularized fit") {
  Fixture fx;
  const std::vector<double> truth = {2.0, 0.0, -1.0};
  SourceSpec src{fx.f_from_weights(truth), SigmaSpec::hat(0.2, 0.6), 1.0, 0.4};
  const double alpha = 0.5;
  FluxTrace flux = make_ip1_flux(fx, src, alpha, 24.0, 4e-3);

  std::mt19937 rng(4321);
  std::normal_distribution<double> nd;
  for (Eigen::Index c = 0; c < flux.values.cols(); ++c) {
    flux.values(0, c) *= 1.0 + 0.01 * nd(rng);
  }

  RegConfig reg;
  reg.noise_level = 0.01;
  const TimeSeries sigma_known = src.sigma.sample(flux.grid);
  const ReconstructionResult res = reconstruct_space_source(
      flux, sigma_known, fx.eig, fx.op, alpha, 3, reg);

  double err = 0.0, scale = 0.0;
  for (int n = 0; n < 3; ++n) {
    err += std::pow(res.mode_weights[n] - truth[static_cast<std::size_t>(n)], 2);
    scale += truth[static_cast<std::size_t>(n)] * truth[static_cast<std::size_t>(n)];
  }
  INFO("weights: " << res.mode_weights.head(3).transpose());
  CHECK(std::sqrt(err / scale) <= 5e-2);
}

TEST_CASE("IP1: scaling equivariance of the recovered weights") {
  Fixture fx;
  SourceSpec src{fx.f_from_weights({1.0, 0.5, -0.25}), SigmaSpec::hat(0.2, 0.6),
                 1.0, 0.4};
  const FluxTrace flux = make_ip1_flux(fx, src, 0.5, 20.0, 4e-3);
  const TimeSeries sigma_known = src.sigma.sample(flux.grid);

  const ReconstructionResult base = reconstruct_space_source(
      flux, sigma_known, fx.eig, fx.op, 0.5, 3, RegConfig{});
  FluxTrace scaled = flux;
  scaled.values *= 3.7;
  const ReconstructionResult sc = reconstruct_space_source(
      scaled, sigma_known, fx.eig, fx.op, 0.5, 3, RegConfig{});
  for (int n = 0; n < 3; ++n) {
    CHECK(sc.mode_weights[n] ==
          Approx(3.7 * base.mode_weights[n]).epsilon(1e-8).margin(1e-12));
  }
}

TEST_CASE("IP1: data-insufficiency when sigma_hat is floored away") {
  Fixture fx;
  const TimeGrid grid{4e-3, 3000};
  FluxTrace flux;
  flux.boundary = BoundarySubset::left(fx.dom);
  flux.grid = grid;
  flux.values = Eigen::MatrixXd::Ones(1, grid.size());
  TimeSeries sigma_zero{grid, Eigen::VectorXd::Zero(grid.size())};
  CHECK_THROWS_AS(reconstruct_space_source(flux, sigma_zero, fx.eig, fx.op,
                                           0.5, 3, RegConfig{}),
                  data_error);
}

TEST_CASE("recover_mode_weights: degenerate 2D group needs enough nodes") {
  DomainSpec dom;
  dom.dimension = 2;
  dom.x_min = dom.y_min = 0.0;
  dom.x_max = dom.y_max = std::numbers::pi;
  dom.nx = dom.ny = 33;
  const auto op = assemble(dom, CoefficientField::constant(dom));
  const auto eig = eigensystem(op, 6);
  REQUIRE(eig.multiplicities[1] == 2);
  const int c0 = eig.first_column_of_group(1);

  const Eigen::VectorXd f =
      (1.3 * eig.modes.col(c0) - 0.7 * eig.modes.col(c0 + 1))
          .cwiseProduct(op.coeffs().rho);
  const BoundarySubset gamma = BoundarySubset::left(dom);
  const ModalCoefficients truth = modal_transfer(eig, f, gamma);

  const Eigen::VectorXd w = recover_mode_weights(truth, eig, gamma, 2);
  CHECK(w[c0] == Approx(1.3).epsilon(1e-8));
  CHECK(w[c0 + 1] == Approx(-0.7).epsilon(1e-8));

  // with a single measurement node the degenerate pair is unresolvable
  CHECK_THROWS_AS(
      recover_mode_weights(truth, eig, BoundarySubset::single(gamma.nodes[0]),
                           2),
      data_error);
}

TEST_CASE("IP3: hat profile from single-point flux, noiseless") {
  Fixture fx;
  SourceSpec src{fx.f_from_weights({1.0}), SigmaSpec::hat(0.15, 0.55), 1.0,
                 0.4};
  const double alpha = 0.5;
  const TimeGrid grid{1.0 / 1024, 1024};
  const FluxTrace flux = flux_trace_modal(fx.eig, fx.op, alpha, src, grid,
                                          BoundarySubset::left(fx.dom));
  const TimeSeries h{grid, flux.values.row(0).transpose()};
  const TimeSeries truth = src.sigma.sample(grid);

  const ReconstructionResult res = reconstruct_time_source(
      h, src.f, fx.eig, fx.op, 0, alpha, 1.0, 0.4, RegConfig{}, &truth);
  INFO("rel error " << res.diagnostics.extra.at("rel_l2_error"));
  CHECK(res.diagnostics.extra.at("rel_l2_error") <= 5e-2);
  CHECK(res.diagnostics.extra.at("x0_in_gset") == 1.0);
  // vanishing tail enforced
  for (std::size_t j = 0; j <= grid.n_steps; ++j) {
    if (grid.time(j) > 0.6 + 1e-9) {
      CHECK(res.sigma_hat.values[static_cast<Eigen::Index>(j)] == 0.0);
    }
  }
}

TEST_CASE("IP3: zero flux yields the zero profile") {
  Fixture fx;
  const TimeGrid grid{1.0 / 512, 512};
  TimeSeries h{grid, Eigen::VectorXd::Zero(grid.size())};
  const ReconstructionResult res = reconstruct_time_source(
      h, fx.f_from_weights({1.0}), fx.eig, fx.op, 0, 0.5, 1.0, 0.4,
      RegConfig{});
  CHECK(res.sigma_hat.values.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("IP3: two-level profile at 0.5% noise via the discrepancy rule") {
  Fixture fx;
  SourceSpec src{fx.f_from_weights({1.0}),
                 SigmaSpec::two_level(0.1, 0.3, 0.55, 0.4), 1.0, 0.4};
  const double alpha = 0.5;
  const TimeGrid grid{1.0 / 1024, 1024};
  FluxTrace flux = flux_trace_modal(fx.eig, fx.op, alpha, src, grid,
                                    BoundarySubset::left(fx.dom));
  std::mt19937 rng(777);
  std::normal_distribution<double> nd;
  const double level = 0.005 * flux.values.cwiseAbs().maxCoeff();
  for (Eigen::Index c = 0; c < flux.values.cols(); ++c) {
    flux.values(0, c) += level * nd(rng);
  }
  const TimeSeries h{grid, flux.values.row(0).transpose()};
  const TimeSeries truth = src.sigma.sample(grid);

  RegConfig reg;
  reg.noise_level = 0.005;
  const ReconstructionResult res = reconstruct_time_source(
      h, src.f, fx.eig, fx.op, 0, alpha, 1.0, 0.4, reg, &truth);
  INFO("rel error " << res.diagnostics.extra.at("rel_l2_error"));
  CHECK(res.diagnostics.extra.at("rel_l2_error") <= 1e-1);
}

TEST_CASE("IP3: time-shift consistency") {
  Fixture fx;
  const double alpha = 0.5;
  const TimeGrid grid{1.0 / 1024, 1024};
  const Eigen::VectorXd f = fx.f_from_weights({1.0});

  auto reconstruct_for = [&](const SigmaSpec& sigma) {
    SourceSpec src{f, sigma, 1.0, 0.3};
    const FluxTrace flux = flux_trace_modal(fx.eig, fx.op, alpha, src, grid,
                                            BoundarySubset::left(fx.dom));
    const TimeSeries h{grid, flux.values.row(0).transpose()};
    return reconstruct_time_source(h, f, fx.eig, fx.op, 0, alpha, 1.0, 0.3,
                                   RegConfig{});
  };
  const ReconstructionResult a = reconstruct_for(SigmaSpec::hat(0.125, 0.5));
  const ReconstructionResult b = reconstruct_for(SigmaSpec::hat(0.25, 0.625));

  // sigma_b(t) = sigma_a(t - 0.125); compare on the shifted grid
  const auto shift = static_cast<Eigen::Index>(std::llround(0.125 / grid.dt));
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = shift; j <= static_cast<Eigen::Index>(0.7 / grid.dt);
       ++j) {
    const double d = b.sigma_hat.values[j] - a.sigma_hat.values[j - shift];
    num += d * d;
    den += std::pow(a.sigma_hat.values[j - shift], 2);
  }
  CHECK(std::sqrt(num / den) <= 2e-2);
}

TEST_CASE("joint_factor_test: proportional, identical, and distinct pairs") {
  const TimeGrid grid{1.0 / 512, 512};
  const TimeSeries s1 = SigmaSpec::hat(0.2, 0.6).sample(grid);

  TimeSeries s2 = s1;
  s2.values *= 2.0;
  const ReconstructionResult prop = joint_factor_test(s1, s2, 0.5, 1.0);
  CHECK(prop.constant == Approx(2.0).epsilon(1e-8));
  CHECK(prop.constancy_defect <= 1e-8);
  CHECK(prop.proportional);

  const ReconstructionResult same = joint_factor_test(s1, s1, 0.5, 1.0);
  CHECK(same.constant == Approx(1.0).epsilon(1e-10));
  CHECK(same.proportional);

  const TimeSeries other = SigmaSpec::two_level(0.1, 0.45, 0.6, 0.25).sample(grid);
  const ReconstructionResult dist = joint_factor_test(s1, other, 0.5, 1.0);
  CHECK(dist.constancy_defect > 0.1);
  CHECK_FALSE(dist.proportional);

  // alpha rational-proximity report: 0.5 = 1/2 exactly
  CHECK(prop.alpha_rational_distance == Approx(0.0).margin(1e-15));
  const ReconstructionResult irr =
      joint_factor_test(s1, s2, 0.585786437626905, 1.0);
  CHECK(irr.alpha_rational_distance > 1e-3);

  TimeSeries zero{grid, Eigen::VectorXd::Zero(grid.size())};
  CHECK_THROWS_AS(joint_factor_test(zero, s1, 0.5, 1.0), data_error);
}

TEST_CASE("compute_gset: phi_1 source admits every boundary point, k = 0") {
  Fixture fx;
  const Eigen::VectorXd f = fx.f_from_weights({1.0});
  const GSetReport rep = compute_gset(f, fx.eig, fx.op, 0.5, 8,
                                      BoundarySubset::all(fx.dom), 1e-7);
  REQUIRE(rep.nodes.size() == 2);
  for (const auto& n : rep.nodes) {
    CHECK(n.g_member);
    CHECK(n.witness_k == 0);
    CHECK(n.j_member);
    CHECK_FALSE(n.inconclusive);
    CHECK(n.defect <= 1e-7);
  }
}

TEST_CASE("compute_gset: source orthogonal to the observable band") {
  Fixture fx(257, 24);
  const auto eig_full = eigensystem(fx.op, 210);
  // far-tail mode: every inverse-power trace is tiny
  const Eigen::VectorXd f =
      eig_full.modes.col(199).cwiseProduct(fx.op.coeffs().rho);
  const GSetReport rep = compute_gset(f, fx.eig, fx.op, 0.5, 6,
                                      BoundarySubset::all(fx.dom), 1e-5);
  for (const auto& n : rep.nodes) {
    CHECK_FALSE(n.g_member);
    CHECK_FALSE(n.j_member);
  }
}

TEST_CASE("compute_gset: G and J flags agree for random sources") {
  Fixture fx;
  std::mt19937 rng(1357);
  std::normal_distribution<double> nd;
  for (int rep_i = 0; rep_i < 10; ++rep_i) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(fx.dom.nx);
    for (int c = 0; c < 8; ++c) f += nd(rng) * fx.eig.modes.col(c);
    f.array() *= fx.op.coeffs().rho.array();
    const double alpha = 0.3 + 0.05 * rep_i;
    const GSetReport rep = compute_gset(f, fx.eig, fx.op, alpha, 8,
                                        BoundarySubset::all(fx.dom), 1e-7);
    for (const auto& n : rep.nodes) {
      CHECK(n.g_member == n.j_member);
      CHECK(n.defect <= 1e-7);
    }
  }
}

TEST_CASE("hopf_certificate: sine and bump generators") {
  Fixture fx;
  Eigen::VectorXd gneg(fx.dom.nx);
  for (int i = 0; i < fx.dom.nx; ++i) gneg[i] = -std::sin(fx.dom.x(i));

  // alpha = 0.4, k2 = 1: alpha*(k2+1) = 0.8 is not an integer
  const HopfCertificate cert = hopf_certificate(gneg, 0, 1, fx.op, 0.4);
  CHECK(cert.strictly_signed);
  CHECK(cert.trace_sign == 1);
  REQUIRE(cert.traces.size() == 2);
  // w = A^{-3} g = -sin/lambda_1^3, so d_nu w = 1/lambda_1^3 at both ends
  CHECK(cert.traces[0] == Approx(1.0).epsilon(2e-3));
  CHECK(cert.traces[1] == Approx(1.0).epsilon(2e-3));

  Eigen::VectorXd gbump(fx.dom.nx);
  for (int i = 0; i < fx.dom.nx; ++i) {
    const double x = fx.dom.x(i);
    gbump[i] = -std::exp(-2.0 * std::pow(x - 1.8, 2)) *
               std::pow(std::sin(x), 2);
  }
  const HopfCertificate bcert = hopf_certificate(gbump, 0, 2, fx.op, 0.4);
  CHECK(bcert.strictly_signed);
  for (Eigen::Index i = 0; i < bcert.traces.size(); ++i) {
    CHECK(bcert.traces[i] > 0.0);
  }

  // sign flip under g -> -g is exact
  const HopfCertificate pcert = hopf_certificate(-gbump, 0, 2, fx.op, 0.4);
  CHECK(pcert.trace_sign == -1);
  CHECK(pcert.strictly_signed);
  CHECK((pcert.traces + bcert.traces).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("hopf_certificate: precondition checks") {
  Fixture fx;
  Eigen::VectorXd mixed(fx.dom.nx);
  for (int i = 0; i < fx.dom.nx; ++i) mixed[i] = std::sin(2.0 * fx.dom.x(i));
  CHECK_THROWS_AS(hopf_certificate(mixed, 0, 1, fx.op, 0.4),
                  std::invalid_argument);

  Eigen::VectorXd gneg(fx.dom.nx);
  for (int i = 0; i < fx.dom.nx; ++i) gneg[i] = -std::sin(fx.dom.x(i));
  // alpha*(k2+1) = 0.5*2 = 1 is an integer: rejected
  CHECK_THROWS_AS(hopf_certificate(gneg, 0, 1, fx.op, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(hopf_certificate(gneg, 2, 1, fx.op, 0.4),
                  std::invalid_argument);
  CHECK_THROWS_AS(hopf_certificate(Eigen::VectorXd::Zero(fx.dom.nx), 0, 1,
                                   fx.op, 0.4),
                  std::invalid_argument);
}

TEST_CASE("Theorem-1 style contrapositive sweep: no false vanishing") {
  Fixture fx(65, 10);
  std::mt19937 rng(2468);
  std::normal_distribution<double> nd;
  const TimeGrid grid{1.0 / 256, 256};
  double min_over_runs = std::numeric_limits<double>::infinity();
  for (int run = 0; run < 20; ++run) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(fx.dom.nx);
    for (int c = 0; c < 8; ++c) f += nd(rng) * fx.eig.modes.col(c);
    f.array() *= fx.op.coeffs().rho.array();
    f /= fx.op.weighted_norm(f);
    SourceSpec src{f, SigmaSpec::hat(0.1, 0.6), 1.0, 0.4};
    const FluxTrace flux = flux_trace_modal(fx.eig, fx.op, 0.5, src, grid,
                                            BoundarySubset::left(fx.dom));
    double late = 0.0;
    for (std::size_t j = 0; j <= grid.n_steps; ++j) {
      if (grid.time(j) >= 0.6) {
        late = std::max(late,
                        std::abs(flux.values(0, static_cast<Eigen::Index>(j))));
      }
    }
    min_over_runs = std::min(min_over_runs, late);
  }
  CHECK(min_over_runs > 1e-8);
}
