#pragma once

#include <stdexcept>
#include <string>

namespace profcast {

// Error taxonomy mirrors the CLI exit codes: config (2), data (3), numeric (4).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace profcast
