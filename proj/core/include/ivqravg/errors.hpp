#pragma once

#include <stdexcept>
#include <string>

namespace ivqr {

//! Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Input violates a documented precondition or type invariant.
class InvalidArgument : public Error
{
public:
  using Error::Error;
};

//! A design or cross-product matrix is (numerically) rank deficient.
class RankDeficiency : public Error
{
public:
  using Error::Error;
};

//! A closed-form rule hit a zero denominator (e.g. the Gaussian plug-in
//! bandwidth at a quantile where the density curvature vanishes).
class ZeroDenominator : public Error
{
public:
  using Error::Error;
};

//! An iterative procedure failed in a way that cannot be reported through a
//! convergence flag.
class SolverFailure : public Error
{
public:
  using Error::Error;
};

} // namespace ivqr
