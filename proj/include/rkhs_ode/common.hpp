#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace rkhs_ode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstVecRef = Eigen::Ref<const Eigen::VectorXd>;
using ConstMatRef = Eigen::Ref<const Eigen::MatrixXd>;

/// Invalid parameters or configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation called with inputs it does not accept (CLI exit code 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Requested operation is not defined for this kernel or field.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite values or a failed factorization (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integration or fitting produced non-finite state (CLI exit code 3).
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long index)
      : NumericalError(what), index_(index) {}
  [[nodiscard]] long index() const noexcept { return index_; }

 private:
  long index_;
};

/// Malformed input file (CLI exit code 4).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line)
      : std::runtime_error(what), line_(line) {}
  [[nodiscard]] long line() const noexcept { return line_; }

 private:
  long line_;
};

/// Filesystem failure (CLI exit code 4).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Warning sink; defaults to stderr. Pass an empty function to silence.
void set_warning_handler(std::function<void(const std::string&)> handler);
void warn(const std::string& message);

/// Runs body(i) for i in [0, count). Each index must write only to its own
/// output slot; results are then independent of the thread count.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body);

/// Child seed for a named random stream, derived from a root seed with a
/// splitmix64 mix of (seed, stream).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

/// Shortest round-trip decimal form of v ("nan", "inf" for non-finite values).
std::string format_number(double v);
void append_number(std::string& out, double v);

/// Thread count from RKHS_ODE_THREADS, or 1 when unset or invalid.
int default_threads();

}  // namespace rkhs_ode
