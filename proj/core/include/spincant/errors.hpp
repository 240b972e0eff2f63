#pragma once

#include <stdexcept>
#include <string>

namespace spincant {

// Exit codes used by the command line tool; library code throws the matching
// exception type and the tool maps it at the boundary.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    validation = 2,
    integrator = 3,
    physics = 4,
    io = 5,
    memory = 6,
};

class Error : public std::runtime_error {
  public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const { return code_; }

  private:
    ExitCode code_;
};

// Bad parameter values, malformed config files, inconsistent scenario setups.
class ValidationError : public Error {
  public:
    explicit ValidationError(const std::string& what) : Error(ExitCode::validation, what) {}
};

// Step-count exhaustion, unmet tolerance, step size underflow.
class IntegratorError : public Error {
  public:
    explicit IntegratorError(const std::string& what) : Error(ExitCode::integrator, what) {}
};

// Violated conservation laws or state structure: norm or trace drift, lost
// hermiticity, negative eigenvalues beyond tolerance, basis truncation overflow.
class PhysicsError : public Error {
  public:
    explicit PhysicsError(const std::string& what) : Error(ExitCode::physics, what) {}
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& what) : Error(ExitCode::io, what) {}
};

class MemoryError : public Error {
  public:
    explicit MemoryError(const std::string& what) : Error(ExitCode::memory, what) {}
};

}
