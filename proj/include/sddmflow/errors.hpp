#pragma once

#include <stdexcept>
#include <string>

namespace sddmflow {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or inputs. The CLI maps this family to exit code 1.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Non-square, asymmetric, or otherwise malformed matrix/graph input.
class StructuralError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Inconsistent distributed configuration (d, R, sweeps differ across nodes).
class ConfigurationError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Numerical failure. The CLI maps this family to exit code 2.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its cap; carries the last residual it saw.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A node program observed a protocol violation (missing or unexpected message).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// The simulated network cannot make progress.
class DeadlockError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// Rethrows the in-flight library error with `prefix` prepended, keeping its
/// concrete type. Call from inside a catch block.
[[noreturn]] inline void rethrow_with_context(const std::string& prefix) {
  try {
    throw;
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(prefix + e.what(), e.residual());
  } catch (const DeadlockError& e) {
    throw DeadlockError(prefix + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(prefix + e.what());
  } catch (const StructuralError& e) {
    throw StructuralError(prefix + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace sddmflow
