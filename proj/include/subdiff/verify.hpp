#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "subdiff/experiment.hpp"
#include "subdiff/fractional_calculus.hpp"
#include "subdiff/inverse.hpp"

namespace subdiff {

struct VerifyCheck {
  std::string suite;
  std::string name;
  bool pass = false;
  double measure = 0.0;  // the quantity the check thresholds
};

/// Condensed invariant suite behind the `verify` command: one cheap, sharp
/// check per documented module invariant.  Runs in well under a minute.
inline std::vector<VerifyCheck> verify_suite() {
  std::vector<VerifyCheck> out;
  auto check = [&out](const std::string& suite, const std::string& name,
                      double measure, double limit) {
    out.push_back({suite, name, measure <= limit, measure});
  };

  // --- mittag_leffler ---
  {
    double worst = 0.0;
    for (int k = -10; k <= 10; k += 2) {
      const double x = static_cast<double>(k);
      worst = std::max(worst,
                       std::abs(ml({1.0, 1.0}, x) - std::exp(x)) /
                           std::exp(x));
    }
    check("mittag_leffler", "exp_reduction", worst, 1e-10);

    worst = 0.0;
    for (double a : {0.3, 0.5, 0.8}) {
      for (double b : {0.5, 1.0, a + 1.0}) {
        worst = std::max(worst, std::abs(ml({a, b}, 0.0) * std::tgamma(b) -
                                         1.0));
      }
    }
    check("mittag_leffler", "value_at_zero", worst, 1e-12);

    // complete-monotonicity surrogate: positive, strictly decreasing
    double defect = 0.0;
    for (double a : {0.3, 0.5, 0.8}) {
      double prev = ml({a, 1.0}, 0.0);
      for (int i = 1; i <= 100; ++i) {
        const double v = ml({a, 1.0}, -0.5 * i);
        if (!(v > 0.0) || !(v < prev)) defect = 1.0;
        prev = v;
      }
    }
    check("mittag_leffler", "monotone_decay", defect, 0.0);

    // index-shift recurrence E_{a,b}(z) = z E_{a,a+b}(z) + 1/Gamma(b)
    worst = 0.0;
    for (double a : {0.4, 0.7}) {
      for (double b : {0.6, 1.0}) {
        for (double z : {-30.0, -2.0, -0.5, 1.0}) {
          const double lhs = ml({a, b}, z);
          const double rhs = z * ml({a, a + b}, z) + 1.0 / std::tgamma(b);
          worst = std::max(worst, std::abs(lhs - rhs) /
                                      std::max({std::abs(lhs), 1e-3}));
        }
      }
    }
    check("mittag_leffler", "index_shift_recurrence", worst, 1e-9);
  }

  // --- fractional_calculus ---
  {
    TimeGrid grid{1.0 / 256, 256};
    const TimeSeries c = sample_series(grid, [](double) { return 3.7; });
    const TimeSeries dc = caputo_l1(0.5, c);
    check("fractional_calculus", "caputo_annihilates_constants",
          dc.values.cwiseAbs().maxCoeff(), 0.0);

    // L1 rate on h = t^2: halving dt shrinks the error by >= 2^1.4
    auto l1_err = [](std::size_t n) {
      TimeGrid g{1.0 / static_cast<double>(n), n};
      const TimeSeries h = sample_series(g, [](double t) { return t * t; });
      const TimeSeries d = caputo_l1(0.5, h);
      const double exact = 2.0 / std::tgamma(2.5);  // at t = 1
      return std::abs(d.values[static_cast<Eigen::Index>(n)] - exact);
    };
    const double ratio = l1_err(256) / l1_err(512);
    check("fractional_calculus", "l1_rate", std::pow(2.0, 1.4) - ratio, 0.0);

    // semigroup: I^0.3 I^0.4 ~ I^0.7 on smooth data
    TimeGrid g2{1.0 / 512, 512};
    const TimeSeries h = sample_series(g2, [](double t) { return std::sin(t); });
    const TimeSeries two = rl_integral(0.3, rl_integral(0.4, h));
    const TimeSeries one = rl_integral(0.7, h);
    check("fractional_calculus", "rl_semigroup",
          (two.values - one.values).cwiseAbs().maxCoeff(), 1e-4);
  }

  // --- elliptic_core ---
  {
    DomainSpec dom;
    dom.x_min = 0.0;
    dom.x_max = ml_detail::kPi;
    auto run_l1 = [&](int nx) {
      DomainSpec d = dom;
      d.nx = nx;
      auto op = assemble(d, CoefficientField::constant(d));
      return eigensystem(op, 4).eigenvalues[0];
    };
    const double r =
        (run_l1(65) - 1.0) / (run_l1(129) - 1.0);
    check("elliptic_core", "eigenvalue_rate_low", 3.5 - r, 0.0);
    check("elliptic_core", "eigenvalue_rate_high", r - 4.5, 0.0);

    DomainSpec d = dom;
    d.nx = 129;
    CoefficientField cf = CoefficientField::constant(d);
    for (int i = 0; i < d.nx; ++i) {
      cf.rho[i] = 1.0 + 0.5 * std::sin(3.0 * d.x(i));
    }
    auto op = assemble(d, cf);
    auto eig = eigensystem(op, 8);
    double ortho = 0.0;
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        const double g = op.weighted_inner(eig.modes.col(a), eig.modes.col(b));
        ortho = std::max(ortho, std::abs(g - (a == b ? 1.0 : 0.0)));
      }
    }
    check("elliptic_core", "rho_orthonormality", ortho, 1e-8);

    std::mt19937 rng(7);
    std::normal_distribution<double> nd;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(d.nx);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d.nx);
    for (int i = 1; i < d.nx - 1; ++i) {
      u[i] = nd(rng);
      v[i] = nd(rng);
    }
    const double asym = std::abs(op.weighted_inner(op.apply(u), v) -
                                 op.weighted_inner(u, op.apply(v))) /
                        (op.weighted_norm(u) * op.weighted_norm(v));
    check("elliptic_core", "self_adjointness", asym, 1e-10);

    const Eigen::VectorXd g = eig.modes.col(2);
    const double roundtrip =
        (op.apply(op.solve(g)) - g).norm() / g.norm();
    check("elliptic_core", "inverse_roundtrip", roundtrip, 1e-8);
  }

  // --- forward_solver + laplace_analysis ---
  {
    DomainSpec dom;
    dom.x_min = 0.0;
    dom.x_max = ml_detail::kPi;
    dom.nx = 129;
    auto op = assemble(dom, CoefficientField::constant(dom));
    auto eig = eigensystem(op, 16);
    SourceSpec src;
    src.f = eig.modes.col(0).cwiseProduct(op.coeffs().rho);
    src.sigma = SigmaSpec::hat(0.1, 0.5);
    src.T = 1.0;
    src.delta = 0.45;
    TimeGrid grid{1.0 / 512, 512};

    const auto traj = spectral_solve(eig, 0.5, src, grid, op);
    double pre = 0.0;
    for (std::size_t j = 0; j * grid.dt <= 0.1; ++j) {
      pre = std::max(pre,
                     traj.snapshots.col(static_cast<Eigen::Index>(j))
                         .cwiseAbs()
                         .maxCoeff());
    }
    check("forward_solver", "causality", pre, 0.0);

    const auto flux =
        flux_trace(traj, op, BoundarySubset::left(dom));
    double late = 0.0;
    for (std::size_t j = 0; j <= grid.n_steps; ++j) {
      if (grid.time(j) >= src.T - 0.4) {
        late = std::max(late, std::abs(flux.values(0, static_cast<Eigen::Index>(j))));
      }
    }
    check("forward_solver", "memory_effect", 1e-8 - late, 0.0);

    // branch-jump self-consistency
    ModalCoefficients mc;
    mc.lambdas = {1.0, 4.0, 9.0};
    mc.coeffs.resize(3, 1);
    mc.coeffs << 0.7, -0.4, 0.2;
    auto sig_hat = [](Complex) { return Complex(1.0, 0.0); };
    double jump_defect = 0.0;
    try {
      for (double R : {0.5, 1.0, 2.0, 4.0}) {
        for (double a : {0.3, 0.5, 0.7}) {
          branch_jump(mc, sig_hat, R, a, 1e-8);
        }
      }
    } catch (const consistency_error&) {
      jump_defect = 1.0;
    }
    check("laplace_analysis", "branch_jump_consistency", jump_defect, 0.0);

    // transform identity at a handful of abscissae
    const ModalCoefficients truth =
        modal_transfer(eig, src.f, BoundarySubset::left(dom));
    const Eigen::VectorXd sig_samples = src.sigma.sample(grid).values;
    double ident = 0.0;
    for (double p : {1.0, 2.0, 4.0}) {
      TimeSeries row{flux.grid, flux.values.row(0).transpose()};
      const Complex lhs = laplace_transform(row, Complex(p, 0.0)).value;
      const Complex sh =
          laplace_transform(TimeSeries{grid, sig_samples}, Complex(p, 0.0))
              .value;
      const Complex rhs = transfer_eval(truth, sh, Complex(p, 0.0), 0.5)[0];
      ident = std::max(ident, std::abs(lhs - rhs) / std::abs(rhs));
    }
    check("laplace_analysis", "transform_identity", ident, 1e-3);

    // G/J agreement and Hopf positivity
    std::mt19937 rng(11);
    std::normal_distribution<double> nd;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(dom.nx);
    for (int c = 0; c < 6; ++c) f += nd(rng) * eig.modes.col(c);
    f.array() *= op.coeffs().rho.array();
    const GSetReport rep = compute_gset(f, eig, op, 0.5, 8,
                                        BoundarySubset::all(dom), 1e-7);
    double gj = 0.0;
    for (const auto& n : rep.nodes) {
      if (n.g_member != n.j_member) gj = 1.0;
    }
    check("inverse_source", "gset_jset_agreement", gj, 0.0);

    Eigen::VectorXd gneg(dom.nx);
    for (int i = 0; i < dom.nx; ++i) gneg[i] = -std::sin(dom.x(i));
    const HopfCertificate cert = hopf_certificate(gneg, 0, 1, op, 0.4);
    check("inverse_source", "hopf_positivity",
          cert.strictly_signed ? 0.0 : 1.0, 0.0);

    // proportional pair through the factor test
    TimeGrid sg{1.0 / 256, 256};
    const TimeSeries s1 = SigmaSpec::hat(0.1, 0.5).sample(sg);
    TimeSeries s2 = s1;
    s2.values *= 2.0;
    const ReconstructionResult fac = joint_factor_test(s1, s2, 0.5, 1.0);
    check("inverse_source", "factor_test_proportional",
          std::abs(fac.constant - 2.0) + fac.constancy_defect, 1e-8);
  }

  return out;
}

}  // namespace subdiff
