#include "refracted/error.hpp"

namespace refracted {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidSpec: return "INVALID_SPEC";
    case Errc::NonFinite: return "NON_FINITE";
    case Errc::NoConvergence: return "NO_CONVERGENCE";
    case Errc::NegativeDrift: return "NEGATIVE_DRIFT";
    case Errc::TolNotMet: return "TOL_NOT_MET";
    case Errc::RepeatedRoot: return "REPEATED_ROOT";
    case Errc::UnsupportedMode: return "UNSUPPORTED_MODE";
    case Errc::Domain: return "DOMAIN";
    case Errc::CertInvalid: return "CERT_INVALID";
    case Errc::Divergent: return "DIVERGENT";
    case Errc::ConfigInvalid: return "CONFIG_INVALID";
    case Errc::Cancelled: return "CANCELLED";
  }
  return "UNKNOWN";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace refracted
