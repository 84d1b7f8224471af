#pragma once

#include <stdexcept>
#include <string>

namespace viewpcl {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// geometry
struct OutOfBounds : Error { using Error::Error; };
struct InvalidDepth : Error { using Error::Error; };

// probability
struct DimensionMismatch : Error { using Error::Error; };
struct RegionMismatch : Error { using Error::Error; };
struct ClassAbsent : Error { using Error::Error; };
struct EmptyRegion : Error { using Error::Error; };

// transport
struct InfeasibleMarginals : Error { using Error::Error; };
struct BothAbsent : Error { using Error::Error; };

// scoring
struct EmptyOmega : Error { using Error::Error; };

// selection
struct EmptyPool : Error { using Error::Error; };
struct ProviderFailure : Error { using Error::Error; };

// scene bundles
struct ManifestError : Error { using Error::Error; };
struct MissingFile : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct InvalidCount : Error { using Error::Error; };
struct InvalidSpec : Error { using Error::Error; };

}  // namespace viewpcl
