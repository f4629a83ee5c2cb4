#pragma once

#include <cstddef>
#include <stdexcept>

#include <Eigen/Core>

namespace subdiff {

/// Uniform time grid {0, dt, ..., n_steps*dt}.
struct TimeGrid {
  double dt = 0.0;
  std::size_t n_steps = 0;

  void validate() const {
    if (!(dt > 0.0) || n_steps == 0) {
      throw std::invalid_argument("TimeGrid: need dt > 0 and n_steps >= 1");
    }
  }

  std::size_t size() const { return n_steps + 1; }
  double time(std::size_t i) const { return dt * static_cast<double>(i); }
  double t_max() const { return dt * static_cast<double>(n_steps); }

  bool operator==(const TimeGrid& other) const {
    return dt == other.dt && n_steps == other.n_steps;
  }
};

/// Scalar samples on a TimeGrid (values.size() == n_steps + 1).
struct TimeSeries {
  TimeGrid grid;
  Eigen::VectorXd values;

  void validate() const {
    grid.validate();
    if (values.size() != static_cast<Eigen::Index>(grid.size())) {
      throw std::invalid_argument("TimeSeries: length must equal n_steps + 1");
    }
  }
};

/// Sample a callable f(t) onto the grid.
template <class F>
TimeSeries sample_series(const TimeGrid& grid, F&& f) {
  grid.validate();
  TimeSeries s;
  s.grid = grid;
  s.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    s.values[static_cast<Eigen::Index>(i)] = f(grid.time(i));
  }
  return s;
}

}  // namespace subdiff
