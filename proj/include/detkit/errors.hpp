#pragma once

#include <stdexcept>
#include <string>

namespace detkit {

struct dimension_error : std::runtime_error {
  explicit dimension_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct spec_error : std::runtime_error {
  explicit spec_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct degenerate_error : std::runtime_error {
  explicit degenerate_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace detkit
