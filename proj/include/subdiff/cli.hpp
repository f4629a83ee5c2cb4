#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "subdiff/experiment.hpp"
#include "subdiff/verify.hpp"

namespace subdiff {

namespace cli_detail {

inline nlohmann::json domain_json(const DomainSpec& d) {
  nlohmann::json j;
  j["dimension"] = d.dimension;
  j["x_min"] = d.x_min;
  j["x_max"] = d.x_max;
  j["nx"] = d.nx;
  if (d.dimension == 2) {
    j["y_min"] = d.y_min;
    j["y_max"] = d.y_max;
    j["ny"] = d.ny;
  }
  return j;
}

inline nlohmann::json meta_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["alpha"] = cfg.alpha;
  j["T"] = cfg.T;
  j["delta"] = cfg.delta;
  j["epsilon"] = cfg.epsilon;
  j["T_max"] = cfg.T_max;
  j["dt"] = cfg.dt;
  j["domain"] = domain_json(cfg.domain);
  j["coefficients"] = cfg.coeff_preset;
  j["modes"] = cfg.effective_modes();
  j["solver"] = cfg.solver;
  j["noise_level"] = cfg.noise_level;
  j["seed"] = cfg.seed;
  // hypotheses of the continuum theory the discrete artifact cannot check
  j["unchecked_assumptions"] = {"coefficient_smoothness",
                                "boundary_regularity"};
  return j;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw config_error("cannot create output directory " + dir);
}

inline nlohmann::json diagnostics_json(const Diagnostics& d) {
  nlohmann::json j;
  j["condition"] = d.condition;
  j["residual"] = d.residual;
  j["regularization"] = d.regularization;
  for (const auto& [k, v] : d.extra) j[k] = v;
  return j;
}

}  // namespace cli_detail

/// simulate: run the forward solver and write the boundary flux plus run
/// metadata into the output directory.
inline int cmd_simulate(const ExperimentConfig& cfg) {
  ExperimentSetup s = build_setup(cfg);
  SourceSpec src{s.f, s.sigma, cfg.T, cfg.delta};

  FluxTrace flux;
  if (cfg.solver == "spectral") {
    flux = flux_trace_modal(s.eig, s.op, cfg.alpha, src, s.grid, s.gamma);
  } else {
    const FieldTrajectory traj = l1_solve(s.op, cfg.alpha, src, s.grid);
    flux = flux_trace(traj, s.op, s.gamma);
  }

  if (cfg.noise_level > 0.0) {
    std::mt19937 rng(cfg.seed);
    std::normal_distribution<double> nd;
    for (Eigen::Index r = 0; r < flux.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < flux.values.cols(); ++c) {
        flux.values(r, c) *= 1.0 + cfg.noise_level * nd(rng);
      }
    }
  }

  cli_detail::ensure_dir(cfg.out_dir);
  write_flux_csv(cfg.out_dir + "/flux.csv", flux);
  write_series_csv(cfg.out_dir + "/sigma.csv", s.sigma.sample(s.grid));
  nlohmann::json meta = cli_detail::meta_json(cfg);
  meta["gamma_nodes"] = s.gamma.nodes;
  write_json(cfg.out_dir + "/meta.json", meta);
  std::cout << "wrote " << cfg.out_dir << "/flux.csv ("
            << flux.boundary.nodes.size() << " nodes x "
            << flux.grid.size() << " times)\n";
  return 0;
}

/// reconstruct --problem ip1|ip3|ip2-test
inline int cmd_reconstruct(const ExperimentConfig& cfg,
                           const std::string& problem) {
  cli_detail::ensure_dir(cfg.out_dir);

  if (problem == "ip2-test") {
    if (cfg.sigma2_form.empty()) {
      throw config_error("ip2-test needs source.sigma2");
    }
    TimeGrid grid{cfg.dt,
                  static_cast<std::size_t>(std::llround(cfg.T / cfg.dt))};
    const TimeSeries s1 =
        experiment_detail::parse_sigma(cfg.sigma_form).sample(grid);
    const TimeSeries s2 =
        experiment_detail::parse_sigma(cfg.sigma2_form).sample(grid);
    const ReconstructionResult r =
        joint_factor_test(s1, s2, cfg.alpha, cfg.ip2_radius);
    nlohmann::json j;
    j["problem"] = "IP2";
    j["recovered"] = {{"constant", r.constant},
                      {"constancy_defect", r.constancy_defect},
                      {"proportional", r.proportional}};
    j["diagnostics"] = cli_detail::diagnostics_json(r.diagnostics);
    j["diagnostics"]["alpha_rational_distance"] = r.alpha_rational_distance;
    write_json(cfg.out_dir + "/result_ip2.json", j);
    std::cout << "C = " << format_full(r.constant)
              << ", defect = " << format_full(r.constancy_defect) << "\n";
    return 0;
  }

  ExperimentSetup s = build_setup(cfg);
  const FluxTrace flux = read_flux_csv(cfg.out_dir + "/flux.csv");
  RegConfig reg;
  reg.tikhonov = cfg.tikhonov;
  reg.noise_level = cfg.noise_level;

  if (problem == "ip1") {
    const TimeSeries sigma_known = s.sigma.sample(flux.grid);
    const Eigen::VectorXd* truth =
        s.truth_mode_weights.size() > 0 ? &s.truth_mode_weights : nullptr;
    FluxTrace data = flux;
    data.boundary.validate(cfg.domain);
    const ReconstructionResult r = reconstruct_space_source(
        data, sigma_known, s.eig, s.op, cfg.alpha, cfg.n_active, reg, truth);
    nlohmann::json j;
    j["problem"] = "IP1";
    std::vector<double> w(r.mode_weights.data(),
                          r.mode_weights.data() + r.mode_weights.size());
    j["recovered"] = {{"mode_weights", w}};
    j["diagnostics"] = cli_detail::diagnostics_json(r.diagnostics);
    if (truth) {
      std::vector<double> tw(truth->data(), truth->data() + truth->size());
      std::vector<double> errs(r.mode_errors.data(),
                               r.mode_errors.data() + r.mode_errors.size());
      j["ground_truth"] = {{"mode_weights", tw}, {"mode_errors", errs}};
    }
    write_json(cfg.out_dir + "/result_ip1.json", j);
    std::ofstream fh(cfg.out_dir + "/f_hat.csv");
    for (Eigen::Index i = 0; i < r.f_hat.size(); ++i) {
      fh << format_full(r.f_hat[i]) << "\n";
    }
    std::cout << "recovered " << cfg.n_active << " mode weights\n";
    return 0;
  }

  if (problem == "ip3") {
    const int x0 = experiment_detail::x0_node_for(cfg);
    Eigen::Index row = -1;
    for (std::size_t r = 0; r < flux.boundary.nodes.size(); ++r) {
      if (flux.boundary.nodes[r] == x0) row = static_cast<Eigen::Index>(r);
    }
    if (row < 0) {
      throw config_error("flux data does not contain the x0 node " +
                         std::to_string(x0));
    }
    const TimeSeries h{flux.grid, flux.values.row(row).transpose()};
    const TimeSeries truth = s.sigma.sample(flux.grid);
    const ReconstructionResult r = reconstruct_time_source(
        h, s.f, s.eig, s.op, x0, cfg.alpha, cfg.T, cfg.delta, reg, &truth);
    nlohmann::json j;
    j["problem"] = "IP3";
    j["recovered"] = {{"sigma_csv", "sigma_hat.csv"}};
    j["diagnostics"] = cli_detail::diagnostics_json(r.diagnostics);
    j["ground_truth"] = {
        {"rel_l2_error", r.diagnostics.extra.at("rel_l2_error")}};
    write_json(cfg.out_dir + "/result_ip3.json", j);
    write_series_csv(cfg.out_dir + "/sigma_hat.csv", r.sigma_hat);
    std::cout << "rel L2 error = "
              << format_full(r.diagnostics.extra.at("rel_l2_error")) << "\n";
    return 0;
  }

  throw config_error("unknown problem '" + problem +
                     "' (expected ip1, ip3 or ip2-test)");
}

/// gset: admissibility report for single-point measurements, plus the
/// positivity certificate when a generator g is configured.
inline int cmd_gset(const ExperimentConfig& cfg) {
  ExperimentSetup s = build_setup(cfg);
  cli_detail::ensure_dir(cfg.out_dir);

  nlohmann::json j;
  if (!cfg.g_form.empty()) {
    Eigen::VectorXd g(cfg.domain.n_nodes());
    const double L = cfg.domain.x_max - cfg.domain.x_min;
    for (int i = 0; i < cfg.domain.n_nodes(); ++i) {
      const double xi = (cfg.domain.x(i) - cfg.domain.x_min) / L;
      const double b = std::sin(ml_detail::kPi * xi);
      if (cfg.g_form == "neg-sin") {
        g[i] = -b;
      } else if (cfg.g_form == "neg-bump") {
        g[i] = -std::exp(-12.0 * (xi - 0.5) * (xi - 0.5)) * b * b;
      } else if (cfg.g_form == "pos-bump") {
        g[i] = std::exp(-12.0 * (xi - 0.5) * (xi - 0.5)) * b * b;
      } else {
        throw config_error("unknown g form '" + cfg.g_form + "'");
      }
    }
    const HopfCertificate cert =
        hopf_certificate(g, cfg.hopf_k1, cfg.hopf_k2, s.op, cfg.alpha);
    std::vector<double> tr(cert.traces.data(),
                           cert.traces.data() + cert.traces.size());
    j["hopf"] = {{"strictly_signed", cert.strictly_signed},
                 {"trace_sign", cert.trace_sign},
                 {"traces", tr}};
  }

  const GSetReport rep =
      compute_gset(s.f, s.eig, s.op, cfg.alpha, cfg.K_max,
                   BoundarySubset::all(cfg.domain), cfg.zero_tol);
  std::ofstream csv(cfg.out_dir + "/gset.csv");
  csv << "node,x,y,g_member,witness_k,j_member,inconclusive,defect\n";
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : rep.nodes) {
    csv << n.node << ',' << format_full(n.x) << ',' << format_full(n.y) << ','
        << (n.g_member ? 1 : 0) << ',' << n.witness_k << ','
        << (n.j_member ? 1 : 0) << ',' << (n.inconclusive ? 1 : 0) << ','
        << format_full(n.defect) << '\n';
    nlohmann::json nj;
    nj["node"] = n.node;
    nj["g_member"] = n.g_member;
    nj["witness_k"] = n.witness_k;
    nj["j_member"] = n.j_member;
    nj["inconclusive"] = n.inconclusive;
    nj["defect"] = n.defect;
    nj["trace_values"] = n.trace_values;
    nodes.push_back(nj);
  }
  j["problem"] = "GSET";
  j["zero_threshold"] = rep.zero_threshold;
  j["K_max"] = rep.K_max;
  j["nodes"] = nodes;
  write_json(cfg.out_dir + "/gset.json", j);

  int members = 0;
  for (const auto& n : rep.nodes) members += n.g_member ? 1 : 0;
  std::cout << members << "/" << rep.nodes.size()
            << " boundary nodes admissible\n";
  return 0;
}

/// verify: run the condensed invariant suite, print one line per check,
/// write a machine-readable report.  --inject-fault ml flips one Taylor
/// coefficient to prove the suite can fail.
inline int cmd_verify(const ExperimentConfig& cfg,
                      const std::string& inject_fault) {
  if (!inject_fault.empty()) {
    if (inject_fault != "ml") {
      throw config_error("unknown fault target '" + inject_fault + "'");
    }
    ml_detail::fault_injection = true;
  }
  const std::vector<VerifyCheck> checks = verify_suite();
  ml_detail::fault_injection = false;

  nlohmann::json j;
  bool all = true;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.suite << "." << c.name
              << " (measure " << format_full(c.measure) << ")\n";
    j["checks"][c.suite + "." + c.name] = {{"pass", c.pass},
                                           {"measure", c.measure}};
    all = all && c.pass;
  }
  j["all_pass"] = all;
  cli_detail::ensure_dir(cfg.out_dir);
  write_json(cfg.out_dir + "/verify_report.json", j);
  std::cout << (all ? "verify: all invariants hold\n"
                    : "verify: FAILURES present\n");
  return all ? 0 : 3;
}

/// Entry point shared by the binary and the test suite.
inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"time-fractional diffusion: forward simulation and source "
               "reconstruction from boundary flux"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<unsigned> seed;
  std::optional<int> modes;
  std::optional<int> threads;
  app.add_option("--config", config_path, "configuration file");
  app.add_option("--out", out_dir, "output directory override");
  app.add_option("--seed", seed, "RNG seed override");
  app.add_option("--modes", modes, "retained mode count override");
  app.add_option("--threads", threads, "worker thread count");

  auto* sim = app.add_subcommand("simulate", "run the forward solver");
  std::string problem = "ip1";
  auto* rec = app.add_subcommand("reconstruct", "run a reconstruction");
  rec->add_option("--problem", problem, "ip1 | ip3 | ip2-test");
  auto* gset = app.add_subcommand("gset", "admissible-point report");
  std::string inject;
  auto* verify = app.add_subcommand("verify", "invariant suite");
  verify->add_option("--inject-fault", inject,
                     "test hook: make a named module misbehave");

  double ml_alpha = 0.5, ml_beta = 1.0, ml_re = 0.0, ml_im = 0.0;
  auto* mleval = app.add_subcommand("ml-eval", "evaluate E_{alpha,beta}(z)");
  mleval->group("");  // hidden debugging command
  mleval->add_option("--alpha", ml_alpha);
  mleval->add_option("--beta", ml_beta);
  mleval->add_option("--re", ml_re);
  mleval->add_option("--im", ml_im);

  std::vector<const char*> argv;
  argv.push_back("subdiff");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (mleval->parsed()) {
      const Complex v = ml(MLParams{ml_alpha, ml_beta}, Complex(ml_re, ml_im));
      std::cout << format_full(v.real()) << " " << format_full(v.imag())
                << "\n";
      return 0;
    }
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = ExperimentConfig::from_doc(ConfigDoc::load(config_path));
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed) cfg.seed = *seed;
    if (modes) cfg.modes = *modes;
    if (threads) cfg.threads = *threads;
    cfg.validate();

    if (sim->parsed()) return cmd_simulate(cfg);
    if (rec->parsed()) return cmd_reconstruct(cfg, problem);
    if (gset->parsed()) return cmd_gset(cfg);
    if (verify->parsed()) return cmd_verify(cfg, inject);
    return 2;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const accuracy_error& e) {
    std::cerr << "accuracy error: " << e.what() << "\n";
    return 4;
  } catch (const regularization_error& e) {
    std::cerr << "regularization error: " << e.what() << "\n";
    return 4;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace subdiff
