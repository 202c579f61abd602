#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace memefuse {

enum class Errc {
  MissingColumn,
  DuplicateId,
  UnreadableImage,
  UnknownLabel,
  UnknownSplit,
  DecodeFailure,
  EmptyClass,
  UnknownBackbone,
  UnknownModelKey,
  ShapeMismatch,
  NonFiniteLoss,
  EmptySplit,
  PreprocessFailure,
  MissingCheckpoint,
  EmptyInput,
  WriteFailure,
  InvalidArgument,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& message);
  Errc code() const { return code_; }

private:
  Errc code_;
};

// One validation problem in a manifest, tied to 1-based data row numbers.
struct ManifestIssue {
  Errc code;
  std::vector<long> rows;
  std::string detail;
};

// Aggregates every issue found in one load so nothing is silently dropped.
class ManifestError : public Error {
public:
  explicit ManifestError(std::vector<ManifestIssue> issues);
  const std::vector<ManifestIssue>& issues() const { return issues_; }

private:
  std::vector<ManifestIssue> issues_;
};

using Rng = std::mt19937_64;

std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex16(std::uint64_t v);

}  // namespace memefuse
