#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subdiff/errors.hpp"
#include "subdiff/forward.hpp"

namespace subdiff {

/// Shortest round-trip decimal representation of a double.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Flux trace CSV: header then rows `t,node,value` in time-major order.
inline void write_flux_csv(const std::string& path, const FluxTrace& flux) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  out << "t,node,value\n";
  for (std::size_t j = 0; j <= flux.grid.n_steps; ++j) {
    for (std::size_t r = 0; r < flux.boundary.nodes.size(); ++r) {
      out << format_full(flux.grid.time(j)) << ','
          << flux.boundary.nodes[r] << ','
          << format_full(flux.values(static_cast<Eigen::Index>(r),
                                     static_cast<Eigen::Index>(j)))
          << '\n';
    }
  }
}

inline FluxTrace read_flux_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,node,value", 0) != 0) {
    throw config_error(path + ": expected flux CSV header t,node,value");
  }
  std::vector<double> ts;
  std::vector<int> nodes;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double t, v;
    int node;
    if (std::sscanf(line.c_str(), "%lf,%d,%lf", &t, &node, &v) != 3) {
      throw config_error(path + ": malformed row '" + line + "'");
    }
    ts.push_back(t);
    nodes.push_back(node);
    values.push_back(v);
  }
  if (ts.empty()) throw config_error(path + ": no data rows");

  FluxTrace flux;
  for (int n : nodes) {
    bool seen = false;
    for (int m : flux.boundary.nodes) {
      if (m == n) {
        seen = true;
        break;
      }
    }
    if (!seen) {
      flux.boundary.nodes.push_back(n);
    } else {
      break;  // node list repeats once per time row
    }
  }
  const std::size_t n_nodes = flux.boundary.nodes.size();
  if (ts.size() % n_nodes != 0) {
    throw config_error(path + ": row count not divisible by node count");
  }
  const std::size_t n_times = ts.size() / n_nodes;
  if (n_times < 2) throw config_error(path + ": need at least two times");
  flux.grid.dt = ts[n_nodes] - ts[0];
  flux.grid.n_steps = n_times - 1;
  flux.values.resize(static_cast<Eigen::Index>(n_nodes),
                     static_cast<Eigen::Index>(n_times));
  for (std::size_t k = 0; k < ts.size(); ++k) {
    flux.values(static_cast<Eigen::Index>(k % n_nodes),
                static_cast<Eigen::Index>(k / n_nodes)) = values[k];
  }
  return flux;
}

/// Time series CSV: header then `t,value`.
inline void write_series_csv(const std::string& path, const TimeSeries& ts) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  out << "t,value\n";
  for (std::size_t j = 0; j <= ts.grid.n_steps; ++j) {
    out << format_full(ts.grid.time(j)) << ','
        << format_full(ts.values[static_cast<Eigen::Index>(j)]) << '\n';
  }
}

/// Column vector from a one-value-per-line CSV (no header).
inline Eigen::VectorXd read_column_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      vals.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw config_error(path + ": cannot parse '" + line + "'");
    }
  }
  if (vals.empty()) throw config_error(path + ": empty");
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = vals[i];
  }
  return v;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace subdiff
