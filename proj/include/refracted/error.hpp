#pragma once

#include <stdexcept>
#include <string>

namespace refracted {

enum class Errc {
  InvalidSpec,
  NonFinite,
  NoConvergence,
  NegativeDrift,
  TolNotMet,
  RepeatedRoot,
  UnsupportedMode,
  Domain,
  CertInvalid,
  Divergent,
  ConfigInvalid,
  Cancelled,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace refracted
