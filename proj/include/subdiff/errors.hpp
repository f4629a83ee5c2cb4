#pragma once

#include <stdexcept>
#include <string>

namespace subdiff {

/// Base class of every error thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, malformed input files, violated preconditions
/// on user-facing data.  CLI exit code 2.
class config_error : public error {
 public:
  using error::error;
};

/// Coefficient fields that violate ellipticity / positivity, reported with
/// the offending node.  Treated as configuration problems (exit code 2).
class coefficient_error : public config_error {
 public:
  using config_error::config_error;
};

/// Solver breakdowns: eigensolver non-convergence, singular factorizations,
/// internal consistency failures.  CLI exit code 3.
class numeric_error : public error {
 public:
  using error::error;
};

/// Ill-conditioned least-squares systems (condition number over the
/// documented ceiling).  CLI exit code 3.
class conditioning_error : public numeric_error {
 public:
  using numeric_error::numeric_error;
};

/// Two algebraically equivalent evaluation paths disagreed beyond
/// tolerance.  CLI exit code 3.
class consistency_error : public numeric_error {
 public:
  using numeric_error::numeric_error;
};

/// A declared accuracy contract could not be met; carries the bound that
/// was actually achieved.  CLI exit code 4.
class accuracy_error : public error {
 public:
  accuracy_error(const std::string& what, double achieved_bound)
      : error(what + " (achieved bound " + std::to_string(achieved_bound) + ")"),
        achieved_bound_(achieved_bound) {}

  double achieved_bound() const noexcept { return achieved_bound_; }

 private:
  double achieved_bound_;
};

/// Spectral truncation leaves more than the tolerated share of the result
/// unaccounted for.  CLI exit code 4.
class truncation_error : public accuracy_error {
 public:
  using accuracy_error::accuracy_error;
};

/// Regularization machinery failed (e.g. the discrepancy principle does not
/// bracket).  CLI exit code 4.
class regularization_error : public error {
 public:
  using error::error;
};

/// Measured data cannot support the requested reconstruction.
/// CLI exit code 4.
class data_error : public error {
 public:
  using error::error;
};

/// Evaluation requested on the branch cut of p^alpha.
class branch_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace subdiff
