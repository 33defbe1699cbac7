#ifndef DYNBN_ERRORS_HPP
#define DYNBN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dynbn {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid graph structure: cycles, undeclared endpoints, duplicate ids.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Parameters outside the mathematical domain of an update
/// (e.g. a Gamma moment match with nonpositive mean).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A design vector with no usable variance direction.
class DegenerateDesignError : public Error {
 public:
  using Error::Error;
};

/// Numerical conditioning failure: singular separator covariance,
/// loss of positive semidefiniteness beyond tolerance.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

/// Scenario file fails validation (schema, dimensions, clique containment).
class ScenarioError : public Error {
 public:
  using Error::Error;
};

/// A quadrature or grid routine could not reach its accuracy target.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

/// Data incompatible with the model at run time; aborts the step.
class ModelMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace dynbn

#endif  // DYNBN_ERRORS_HPP
