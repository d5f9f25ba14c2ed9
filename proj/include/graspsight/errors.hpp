#pragma once

#include <stdexcept>
#include <string>

namespace gs {

// Error taxonomy mirrors the CLI exit-code contract:
//   config_error -> 2, io_error -> 3, numeric_error -> 4.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension or wiring problems inside the net builder / tape.
struct shape_error : std::runtime_error {
  explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gs
