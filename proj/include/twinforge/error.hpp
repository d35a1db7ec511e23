#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace twinforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad library spec, hyperparameters, presets, CLI flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: dimension mismatch, non-finite values, bad files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Integration blew up. Carries the last time at which the state was finite.
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, double last_good_time)
      : Error(what), last_good_time_(last_good_time) {}
  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

/// Numerical failure inside the sampler; names the offending library columns.
class SamplerError : public Error {
 public:
  SamplerError(const std::string& what, std::vector<std::string> columns = {})
      : Error(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

/// Prediction-time failure (integration of the updated twin blew up).
class PredictError : public Error {
 public:
  using Error::Error;
};

}  // namespace twinforge
