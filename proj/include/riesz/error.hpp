#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace riesz {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Two nodes closer than the coincidence tolerance where that is not allowed.
class CoincidenceError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(std::size_t plate, double deficit)
      : Error("plate " + std::to_string(plate) + " cannot carry its mass, deficit " +
              std::to_string(deficit)),
        plate_(plate),
        deficit_(deficit) {}
  std::size_t plate() const { return plate_; }
  double deficit() const { return deficit_; }

 private:
  std::size_t plate_;
  double deficit_;
};

class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(double radicand)
      : Error("energy form is not positive definite here, value " + std::to_string(radicand)),
        radicand_(radicand) {}
  double radicand() const { return radicand_; }

 private:
  double radicand_;
};

class ShortCircuitError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace riesz
