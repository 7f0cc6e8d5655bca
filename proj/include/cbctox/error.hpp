#pragma once

#include <stdexcept>
#include <string>

namespace cbctox {

// code is a stable machine-readable tag ("io", "shape", "domain", ...);
// the CLI surfaces it in its JSON error object.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool ok, const std::string& code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

}  // namespace cbctox
