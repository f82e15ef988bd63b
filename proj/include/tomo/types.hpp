#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tomo {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// Error types. All derive from Error so callers can catch broadly.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct InvalidState : Error {
  using Error::Error;
};
struct InvalidPom : Error {
  using Error::Error;
};
struct NotInformationallyComplete : Error {
  using Error::Error;
};
struct NotSic : Error {
  using Error::Error;
};
struct RankDeficientChi : Error {
  using Error::Error;
};
struct ZeroProbabilityWithCounts : Error {
  using Error::Error;
};
struct EigensolverFailure : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace tomo
