#pragma once

#include <stdexcept>
#include <string>

namespace riskgraph {

// Every failure raised by the library carries a machine-readable code, a
// human message and an optional locus (node, field path, line, tick...).
// The CLI and the HTTP service render these as {code, message, locus}.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, std::string locus = {})
      : std::runtime_error(message), code_(std::move(code)), locus_(std::move(locus)) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& locus() const noexcept { return locus_; }

  // Usage and parse failures, as opposed to domain failures such as ZeroMass.
  bool is_input_error() const noexcept {
    return code_ == "ParseError" || code_ == "UsageError" || code_ == "InvalidNetwork";
  }

 private:
  std::string code_;
  std::string locus_;
};

namespace errc {
inline constexpr const char* kCycleDetected = "CycleDetected";
inline constexpr const char* kOverlappingSets = "OverlappingSets";
inline constexpr const char* kInvalidNode = "InvalidNode";
inline constexpr const char* kCardinalityMismatch = "CardinalityMismatch";
inline constexpr const char* kVariableNotInScope = "VariableNotInScope";
inline constexpr const char* kStateOutOfRange = "StateOutOfRange";
inline constexpr const char* kZeroMass = "ZeroMass";
inline constexpr const char* kStateSpaceTooLarge = "StateSpaceTooLarge";
inline constexpr const char* kConflictingEvidence = "ConflictingEvidence";
inline constexpr const char* kParseError = "ParseError";
inline constexpr const char* kInvalidNetwork = "InvalidNetwork";
inline constexpr const char* kEmptyDataset = "EmptyDataset";
inline constexpr const char* kInsufficientData = "InsufficientData";
inline constexpr const char* kInvalidArgument = "InvalidArgument";
inline constexpr const char* kNotFound = "NotFound";
inline constexpr const char* kUsageError = "UsageError";
}  // namespace errc

}  // namespace riskgraph
