#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

namespace phonosem {

enum class ErrorKind {
  invalid_input,
  io_error,
  unknown_symbol,
  unmapped_syllable,
  empty_category,
  missing_coefficient,
  insufficient_scores,
  unknown_dimension,
  missing_form,
  missing_meaning,
  endpoint_error,
  audio_missing,
  empty_after_exclusion,
  degenerate_variance,
  malformed_textgrid,
  missing_tier,
  alignment_mismatch,
  length_mismatch,
  malformed_dump,
};

constexpr std::string_view kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input: return "InvalidInput";
    case ErrorKind::io_error: return "IoError";
    case ErrorKind::unknown_symbol: return "UnknownSymbol";
    case ErrorKind::unmapped_syllable: return "UnmappedSyllable";
    case ErrorKind::empty_category: return "EmptyCategory";
    case ErrorKind::missing_coefficient: return "MissingCoefficient";
    case ErrorKind::insufficient_scores: return "InsufficientScores";
    case ErrorKind::unknown_dimension: return "UnknownDimension";
    case ErrorKind::missing_form: return "MissingForm";
    case ErrorKind::missing_meaning: return "MissingMeaning";
    case ErrorKind::endpoint_error: return "EndpointError";
    case ErrorKind::audio_missing: return "AudioMissing";
    case ErrorKind::empty_after_exclusion: return "EmptyAfterExclusion";
    case ErrorKind::degenerate_variance: return "DegenerateVariance";
    case ErrorKind::malformed_textgrid: return "MalformedTextGrid";
    case ErrorKind::missing_tier: return "MissingTier";
    case ErrorKind::alignment_mismatch: return "AlignmentMismatch";
    case ErrorKind::length_mismatch: return "LengthMismatch";
    case ErrorKind::malformed_dump: return "MalformedDump";
  }
  return "Unknown";
}

/// Every failure raised by the library. `details` carries machine-readable
/// context (offending position, missing key, line number, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), kind_(kind), details_(std::move(details)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const nlohmann::json& details() const noexcept { return details_; }

  /// I/O problems are environmental; everything else is a validation failure.
  bool is_validation() const noexcept { return kind_ != ErrorKind::io_error; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["error"] = std::string(kind_name(kind_));
    j["message"] = what();
    j["details"] = details_;
    return j;
  }

 private:
  ErrorKind kind_;
  nlohmann::json details_;
};

}  // namespace phonosem
