#pragma once

#include <stdexcept>
#include <string>

namespace kli {

// Data and contract violations raised by the library. The CLI maps these to
// exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kli
