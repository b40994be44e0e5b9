#pragma once

#include <stdexcept>
#include <string>

namespace ltml {

// All recoverable failures surface as this exception type; the message names
// the offending entity (node id, class id, key, path).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ltml
