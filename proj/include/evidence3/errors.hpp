#pragma once

#include <stdexcept>
#include <string>

namespace ev3 {

// Exception hierarchy mirrors the CLI exit-code contract:
//   IoError -> 2, CalibrationError/ValidationError -> 3, TrainingError -> 4.

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ev3
