#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace omcal {

// Base class for all toolkit errors. Subclasses distinguish I/O and
// configuration problems (CLI exit code 2) from computational failures
// (exit code 1).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- configuration / I/O side -----------------------------------------

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Manifest or CSV schema violation; message carries file/field diagnostics.
class SchemaError : public IoError {
 public:
  using IoError::IoError;
};

// Duplicate run key in a manifest.
class ConflictError : public IoError {
 public:
  using IoError::IoError;
};

// --- computational side ------------------------------------------------

// Query outside a calibrated table range without extrapolation enabled.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Trace or spectrum does not span enough linewidths to support a fit.
class InsufficientSpanError : public Error {
 public:
  using Error::Error;
};

// Optimizer did not converge; carries the best parameter vector seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, std::vector<double> best, double residual_norm)
      : Error(msg), best_params(std::move(best)), residual_norm(residual_norm) {}
  std::vector<double> best_params;
  double residual_norm = 0.0;
};

// Residual function produced a non-finite value; carries the offending point.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& msg, std::vector<double> at)
      : Error(msg), params(std::move(at)) {}
  std::vector<double> params;
};

class IllConditionedError : public Error {
 public:
  using Error::Error;
};

// Data cannot constrain a parameter; message names it.
class IdentifiabilityError : public Error {
 public:
  using Error::Error;
};

// Blue-pumping above the self-oscillation threshold where a gain or
// phonon conversion was requested.
class SelfOscillationError : public Error {
 public:
  using Error::Error;
};

// Signal power above the TWPA saturation boundary.
class SaturationError : public Error {
 public:
  using Error::Error;
};

// TWPA correction requested but no calibration available.
class MissingCorrectionError : public Error {
 public:
  using Error::Error;
};

class AbsentPeakError : public Error {
 public:
  using Error::Error;
};

}  // namespace omcal
