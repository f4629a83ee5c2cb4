#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subdiff/config.hpp"
#include "subdiff/forward.hpp"
#include "subdiff/inverse.hpp"
#include "subdiff/io.hpp"

namespace subdiff {

/// Typed view of a configuration file.
struct ExperimentConfig {
  DomainSpec domain;
  std::string coeff_preset = "unit";
  std::string a_csv, q_csv, rho_csv;

  double alpha = 0.5;
  double T = 1.0, delta = 0.4, epsilon = 0.4, T_max = 1.0;

  std::string sigma_form = "hat 0.2 0.6";
  std::string sigma2_form;
  std::vector<double> f_mode_weights;
  std::string f_preset;
  std::string f_csv;
  std::string g_form;
  int hopf_k1 = 0, hopf_k2 = 1;

  std::string gamma_kind = "left";
  std::vector<int> gamma_nodes;
  std::optional<double> x0;
  double noise_level = 0.0;

  int modes = 0;  // 0: per-dimension default (64 in 1D, 200 in 2D)
  double dt = 1e-3;
  std::string solver = "spectral";

  int n_active = 3;
  double tikhonov = -1.0;
  int K_max = 8;
  double zero_tol = 1e-7;
  double ip2_radius = 1.0;

  unsigned seed = 1234;
  int threads = 1;
  std::string out_dir = "out";

  static ExperimentConfig from_doc(const ConfigDoc& doc) {
    ExperimentConfig c;
    c.domain.dimension = doc.get_int_or("domain", "dimension", 1);
    c.domain.x_min = doc.get_double_or("domain", "x_min", 0.0);
    c.domain.x_max = doc.get_double_or("domain", "x_max", 3.141592653589793);
    c.domain.nx = doc.get_int_or("domain", "resolution", 257);
    if (c.domain.dimension == 2) {
      c.domain.y_min = doc.get_double_or("domain", "y_min", 0.0);
      c.domain.y_max = doc.get_double_or("domain", "y_max", c.domain.x_max);
      c.domain.ny = doc.get_int_or("domain", "resolution_y", c.domain.nx);
    }
    c.coeff_preset = doc.get_or("coefficients", "preset", "unit");
    c.a_csv = doc.get_or("coefficients", "a_csv", "");
    c.q_csv = doc.get_or("coefficients", "q_csv", "");
    c.rho_csv = doc.get_or("coefficients", "rho_csv", "");

    c.alpha = doc.get_double_or("fractional", "alpha", 0.5);
    c.T = doc.get_double_or("time", "T", 1.0);
    c.delta = doc.get_double_or("time", "delta", 0.4);
    c.epsilon = doc.get_double_or("time", "epsilon", c.delta);
    c.T_max = doc.get_double_or("time", "T_max", c.T);
    c.dt = doc.get_double_or("time", "dt", 1e-3);

    c.sigma_form = doc.get_or("source", "sigma", "hat 0.2 0.6");
    c.sigma2_form = doc.get_or("source", "sigma2", "");
    if (doc.has("source", "f_mode_weights")) {
      c.f_mode_weights = doc.get_doubles("source", "f_mode_weights");
    }
    c.f_preset = doc.get_or("source", "f_preset", "");
    c.f_csv = doc.get_or("source", "f_csv", "");
    c.g_form = doc.get_or("source", "g_form", "");
    c.hopf_k1 = doc.get_int_or("source", "hopf_k1", 0);
    c.hopf_k2 = doc.get_int_or("source", "hopf_k2", 1);

    c.gamma_kind = doc.get_or("measurement", "gamma", "left");
    if (doc.has("measurement", "nodes")) {
      for (double v : doc.get_doubles("measurement", "nodes")) {
        c.gamma_nodes.push_back(static_cast<int>(v));
      }
    }
    if (doc.has("measurement", "x0")) {
      c.x0 = doc.get_double("measurement", "x0");
    }
    c.noise_level = doc.get_double_or("measurement", "noise_level", 0.0);

    c.modes = doc.get_int_or("solver", "modes", 0);
    c.solver = doc.get_or("solver", "solver", "spectral");

    c.n_active = doc.get_int_or("reconstruction", "n_active", 3);
    const std::string tik =
        doc.get_or("reconstruction", "tikhonov", "auto");
    c.tikhonov = tik == "auto" ? -1.0 : std::stod(tik);
    c.K_max = doc.get_int_or("reconstruction", "K_max", 8);
    c.zero_tol = doc.get_double_or("reconstruction", "zero_tol", 1e-7);
    c.ip2_radius = doc.get_double_or("reconstruction", "ip2_radius", 1.0);
    c.seed = static_cast<unsigned>(doc.get_int_or("reconstruction", "seed", 1234));

    c.out_dir = doc.get_or("output", "directory", "out");
    return c;
  }

  void validate() const {
    try {
      domain.validate();
    } catch (const std::invalid_argument& e) {
      throw config_error(e.what());
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw config_error("alpha must lie in (0, 1)");
    }
    if (!(delta > 0.0 && delta < T)) throw config_error("need 0 < delta < T");
    if (!(epsilon > 0.0 && epsilon < T)) {
      throw config_error("need 0 < epsilon < T");
    }
    if (!(T_max >= T)) throw config_error("need T_max >= T");
    if (!(dt > 0.0) || T_max / dt > 5e6) {
      throw config_error("dt out of range");
    }
    for (const std::string& p : {a_csv, q_csv, rho_csv, f_csv}) {
      if (!p.empty() && !std::filesystem::exists(p)) {
        throw config_error("referenced file does not exist: " + p);
      }
    }
    if (solver != "spectral" && solver != "l1") {
      throw config_error("solver must be 'spectral' or 'l1'");
    }
  }

  int effective_modes() const {
    if (modes > 0) return modes;
    return domain.dimension == 1 ? 64 : 200;
  }
};

namespace experiment_detail {

inline SigmaSpec parse_sigma(const std::string& form) {
  std::istringstream in(form);
  std::string kind;
  in >> kind;
  std::vector<double> a;
  double v;
  while (in >> v) a.push_back(v);
  if (kind == "hat" && a.size() == 2) return SigmaSpec::hat(a[0], a[1]);
  if (kind == "bump" && a.size() == 2) return SigmaSpec::bump(a[0], a[1]);
  if (kind == "const" && a.size() == 2) return SigmaSpec::const_on(a[0], a[1]);
  if (kind == "twolevel" && a.size() == 4) {
    return SigmaSpec::two_level(a[0], a[1], a[2], a[3]);
  }
  throw config_error("cannot parse sigma form '" + form + "'");
}

inline CoefficientField coefficients_for(const ExperimentConfig& cfg) {
  const DomainSpec& dom = cfg.domain;
  if (!cfg.a_csv.empty() || !cfg.q_csv.empty() || !cfg.rho_csv.empty()) {
    CoefficientField cf = CoefficientField::constant(dom);
    if (!cfg.a_csv.empty()) {
      cf.a11 = read_column_csv(cfg.a_csv);
      if (dom.dimension == 2) cf.a22 = cf.a11;
    }
    if (!cfg.q_csv.empty()) cf.q = read_column_csv(cfg.q_csv);
    if (!cfg.rho_csv.empty()) cf.rho = read_column_csv(cfg.rho_csv);
    return cf;
  }
  const double Lx = dom.x_max - dom.x_min;
  auto xi = [&](double x) { return (x - dom.x_min) / Lx; };
  if (cfg.coeff_preset == "unit") {
    return CoefficientField::constant(dom);
  }
  if (cfg.coeff_preset == "var-rho") {
    return CoefficientField::from_functions(
        dom, [](double, double) { return 1.0; },
        [](double, double) { return 0.0; },
        [&](double x, double) {
          return 1.25 + 0.25 * std::sin(2.0 * ml_detail::kPi * xi(x));
        });
  }
  if (cfg.coeff_preset == "var-a") {
    return CoefficientField::from_functions(
        dom,
        [&](double x, double) {
          return 1.0 + 0.3 * std::sin(ml_detail::kPi * xi(x));
        },
        [&](double x, double) { return 0.1 * (1.0 + xi(x)); },
        [](double, double) { return 1.0; });
  }
  if (cfg.coeff_preset == "mixed") {
    return CoefficientField::from_functions(
        dom,
        [&](double x, double) {
          return 1.0 + 0.3 * std::sin(ml_detail::kPi * xi(x));
        },
        [&](double x, double) { return 0.2 * xi(x); },
        [&](double x, double) {
          return 1.3 + 0.3 * std::cos(ml_detail::kPi * xi(x));
        });
  }
  throw config_error("unknown coefficient preset '" + cfg.coeff_preset + "'");
}

inline BoundarySubset gamma_for(const ExperimentConfig& cfg) {
  const DomainSpec& dom = cfg.domain;
  if (!cfg.gamma_nodes.empty()) return BoundarySubset{cfg.gamma_nodes};
  if (cfg.gamma_kind == "left") return BoundarySubset::left(dom);
  if (cfg.gamma_kind == "right") return BoundarySubset::right(dom);
  if (cfg.gamma_kind == "both") {
    BoundarySubset b = BoundarySubset::left(dom);
    for (int n : BoundarySubset::right(dom).nodes) b.nodes.push_back(n);
    return b;
  }
  if (cfg.gamma_kind == "all") return BoundarySubset::all(dom);
  throw config_error("unknown gamma spec '" + cfg.gamma_kind + "'");
}

/// Nearest boundary node to the configured x0 coordinate (1D).
inline int x0_node_for(const ExperimentConfig& cfg) {
  const DomainSpec& dom = cfg.domain;
  if (!cfg.x0) {
    const BoundarySubset g = gamma_for(cfg);
    return g.nodes.front();
  }
  if (dom.dimension != 1) {
    throw config_error("measurement.x0 as a coordinate is 1D-only; use "
                       "measurement.nodes in 2D");
  }
  return std::abs(*cfg.x0 - dom.x_min) <= std::abs(*cfg.x0 - dom.x_max)
             ? 0
             : dom.nx - 1;
}

}  // namespace experiment_detail

/// Heavy objects assembled once per command.
struct ExperimentSetup {
  DiscreteOperator op;
  EigenSystem eig;
  Eigen::VectorXd f;
  SigmaSpec sigma;
  BoundarySubset gamma;
  TimeGrid grid;
  Eigen::VectorXd truth_mode_weights;  // empty unless f given by weights
};

inline ExperimentSetup build_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  const DomainSpec& dom = cfg.domain;
  CoefficientField cf = experiment_detail::coefficients_for(cfg);
  DiscreteOperator op = assemble(dom, cf);
  EigenSystem eig = eigensystem(op, cfg.effective_modes());

  Eigen::VectorXd f = Eigen::VectorXd::Zero(dom.n_nodes());
  Eigen::VectorXd truth;
  if (!cfg.f_mode_weights.empty()) {
    truth = Eigen::VectorXd::Zero(eig.n_modes());
    for (std::size_t i = 0;
         i < cfg.f_mode_weights.size() &&
         i < static_cast<std::size_t>(eig.n_modes());
         ++i) {
      truth[static_cast<Eigen::Index>(i)] = cfg.f_mode_weights[i];
      f += cfg.f_mode_weights[i] * eig.modes.col(static_cast<Eigen::Index>(i));
    }
    f.array() *= cf.rho.array();
  } else if (!cfg.f_csv.empty()) {
    f = read_column_csv(cfg.f_csv);
    if (f.size() != dom.n_nodes()) {
      throw config_error("f_csv length does not match the grid");
    }
  } else if (!cfg.f_preset.empty()) {
    const double Lx = dom.x_max - dom.x_min;
    for (int id = 0; id < dom.n_nodes(); ++id) {
      const double sx =
          std::sin(ml_detail::kPi * (dom.x(id) - dom.x_min) / Lx);
      double val;
      if (cfg.f_preset == "sin") {
        val = sx;
      } else if (cfg.f_preset == "bump") {
        const double c = 0.5 * (dom.x_min + dom.x_max);
        val = std::exp(-18.0 * std::pow((dom.x(id) - c) / Lx, 2)) * sx * sx;
      } else {
        throw config_error("unknown f preset '" + cfg.f_preset + "'");
      }
      if (dom.dimension == 2) {
        const double Ly = dom.y_max - dom.y_min;
        val *= std::sin(ml_detail::kPi * (dom.y(id) - dom.y_min) / Ly);
      }
      f[id] = val;
    }
  }

  TimeGrid grid{cfg.dt,
                static_cast<std::size_t>(std::llround(cfg.T_max / cfg.dt))};

  return ExperimentSetup{std::move(op), std::move(eig), std::move(f),
                         experiment_detail::parse_sigma(cfg.sigma_form),
                         experiment_detail::gamma_for(cfg), grid,
                         std::move(truth)};
}

}  // namespace subdiff
