#pragma once

#include <stdexcept>
#include <string>

namespace seqbreak {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// A moment matrix is not positive definite or is too ill-conditioned to invert.
class SingularMoments : public Error {
public:
  using Error::Error;
};

/// The least-squares solver ran out of iterations above tolerance.
class NoConvergence : public Error {
public:
  using Error::Error;
};

/// A fitting window has no more observations than parameters.
class DegenerateWindow : public Error {
public:
  using Error::Error;
};

/// A closed-end detector was stepped past its horizon.
class HorizonExceeded : public Error {
public:
  using Error::Error;
};

/// The bootstrap variance estimate collapsed to zero.
class DegenerateBootstrap : public Error {
public:
  using Error::Error;
};

class EmptySample : public Error {
public:
  using Error::Error;
};

} // namespace seqbreak
