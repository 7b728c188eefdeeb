#pragma once

#include <stdexcept>
#include <string>

namespace tvvi {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input shapes or values violate a precondition.
struct DimensionMismatch : Error {
  using Error::Error;
};

struct InvalidProblem : Error {
  using Error::Error;
};

// Iterative solver exhausted its budget above tolerance.
struct NoConvergence : Error {
  NoConvergence(const std::string& what, int iterations_, double residual_)
      : Error(what), iterations(iterations_), residual(residual_) {}
  int iterations;
  double residual;
};

// PDHG step sizes violate tau*sigma*|K|^2 < 1.
struct StepSizeInvalid : Error {
  using Error::Error;
};

struct SingularSystem : Error {
  using Error::Error;
};

// Slack feasibility set is empty (inputs are not a VI solution).
struct Infeasible : Error {
  using Error::Error;
};

struct PartitionCapExceeded : Error {
  PartitionCapExceeded(const std::string& what, int set_size_, int cap_)
      : Error(what), set_size(set_size_), cap(cap_) {}
  int set_size;
  int cap;
};

// No biactive partition passed the multiplier sign tests.
struct NoValidPartition : Error {
  using Error::Error;
};

struct InjectivityRepairFailed : Error {
  using Error::Error;
};

// psi = 0: the zero step is already optimal for the modified subproblem.
struct DegeneratePsiZero : Error {
  using Error::Error;
};

}  // namespace tvvi
