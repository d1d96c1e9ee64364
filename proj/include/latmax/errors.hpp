#pragma once

#include <stdexcept>
#include <string>

namespace latmax {

// Raised when a numerical routine cannot produce a trustworthy result:
// non-PSD covariance, quadrature that misses its tolerance, a sampler with
// zero acceptances.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// File or stream failures, including malformed headers and short payloads.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace latmax
