#pragma once

#include <stdexcept>
#include <string>

namespace partsyn {

// Malformed or missing input data. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Posterior fitting failed or did not converge. CLI exit code 3.
class ModelFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or command line. CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace partsyn
