// Copyright 2026 The mfclear Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MFCLEAR_ERRORS_HPP_
#define MFCLEAR_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <vector>

namespace mfclear {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or incomplete configuration (CLI exit code 1).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : Error(key + (line >= 0 ? " (line " + std::to_string(line) + ")" : "") +
              ": " + what),
        key_(key),
        line_(line) {}
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

// A standing modelling assumption is violated (CLI exit code 2).
class AssumptionViolation : public Error {
 public:
  AssumptionViolation(const std::string& clause, const std::string& what)
      : Error(clause + ": " + what), clause_(clause) {}
  const std::string& clause() const { return clause_; }

 private:
  std::string clause_;
};

class NonSPDMatrix : public AssumptionViolation {
  using AssumptionViolation::AssumptionViolation;
};
class Rho2TooSmall : public AssumptionViolation {
  using AssumptionViolation::AssumptionViolation;
};
class ConvexityViolated : public AssumptionViolation {
  using AssumptionViolation::AssumptionViolation;
};

class DimensionMismatch : public Error {
  using Error::Error;
};
class OutOfMemoryBudget : public Error {
  using Error::Error;
};
class EmptyCloud : public Error {
  using Error::Error;
};
class LineSearchStall : public Error {
  using Error::Error;
};
class RecursionBlowup : public Error {
  using Error::Error;
};
class MisalignedGrids : public Error {
  using Error::Error;
};
class UnsupportedDimension : public Error {
  using Error::Error;
};
class DegenerateFit : public Error {
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, int iterations, double residual,
                std::vector<double> history = {})
      : Error(what + " after " + std::to_string(iterations) +
              " iterations, residual " + std::to_string(residual)),
        iterations_(iterations),
        residual_(residual),
        history_(std::move(history)) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }
  const std::vector<double>& history() const { return history_; }

 private:
  int iterations_;
  double residual_;
  std::vector<double> history_;
};

// The continuation did not reach coupling strength 1.
class ContractionFailure : public Error {
 public:
  ContractionFailure(double rho_reached, std::vector<double> residuals)
      : Error("continuation stalled at coupling " + std::to_string(rho_reached)),
        rho_reached_(rho_reached),
        residuals_(std::move(residuals)) {}
  double rho_reached() const { return rho_reached_; }
  const std::vector<double>& residuals() const { return residuals_; }

 private:
  double rho_reached_;
  std::vector<double> residuals_;
};

}  // namespace mfclear

#endif  // MFCLEAR_ERRORS_HPP_
