#pragma once

#include <stdexcept>
#include <string>

namespace vth {

// Malformed or unusable input data: bad files, undersized images, empty
// datasets. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown (non-finite loss, failed gradient check).
// Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vth
