#pragma once

#include <stdexcept>
#include <string>

namespace examgrid {

// Base for every domain failure. code() is the stable name surfaced by the
// CLI and the HTTP layer (e.g. "TagMismatch", "WrongVariant").
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(detail.empty() ? code : code + ": " + detail),
        code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace examgrid
