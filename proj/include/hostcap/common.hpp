#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hostcap {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Graph has a cycle, a disconnected node, or the wrong branch count.
class NotRadialError : public Error {
  public:
    using Error::Error;
};

/// No branch is incident to the substation node.
class NotRootedError : public Error {
  public:
    using Error::Error;
};

/// Vector or matrix dimensions do not match the network.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// Triangular solve hit a zero pivot (ordering bug; impossible on a valid tree).
class SingularSystemError : public Error {
  public:
    using Error::Error;
};

/// Convex program has an empty feasible set.
class InfeasibleProgramError : public Error {
  public:
    InfeasibleProgramError(const std::string& msg, int node) : Error(msg), binding_node(node) {}
    int binding_node = -1;
};

/// Results of two direction solves cannot be combined.
class StatusMismatchError : public Error {
  public:
    using Error::Error;
};

/// Brute-force grid would exceed the desk-scale budget.
class GridTooLargeError : public Error {
  public:
    using Error::Error;
};

/// Feeder file is malformed.
class ParseError : public Error {
  public:
    ParseError(const std::string& where, const std::string& reason)
        : Error(where + ": " + reason) {}
};

/// Feeder file declares a schema version this build does not read.
class UnsupportedVersionError : public Error {
  public:
    using Error::Error;
};

/// Filesystem failure while writing results.
class IoError : public Error {
  public:
    using Error::Error;
};

}  // namespace hostcap
