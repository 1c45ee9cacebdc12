#pragma once

#include <stdexcept>
#include <string>

namespace disom {

/// Two search points (or a point and an oracle) disagree on the dimension n.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument lies outside the domain of the operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A parameter regime that cannot be realized at the requested size.
class InfeasibleRegime : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reading or writing experiment data failed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace disom
