#include "memefuse/common.hpp"

#include <sstream>

namespace memefuse {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnreadableImage: return "UnreadableImage";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::UnknownSplit: return "UnknownSplit";
    case Errc::DecodeFailure: return "DecodeFailure";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::UnknownBackbone: return "UnknownBackbone";
    case Errc::UnknownModelKey: return "UnknownModelKey";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::PreprocessFailure: return "PreprocessFailure";
    case Errc::MissingCheckpoint: return "MissingCheckpoint";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::WriteFailure: return "WriteFailure";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

namespace {

std::string describe(const std::vector<ManifestIssue>& issues) {
  std::ostringstream os;
  os << issues.size() << " manifest issue(s)";
  for (const auto& issue : issues) {
    os << "\n  " << errc_name(issue.code) << " [rows";
    for (long r : issue.rows) os << ' ' << r;
    os << "] " << issue.detail;
  }
  return os.str();
}

}  // namespace

ManifestError::ManifestError(std::vector<ManifestIssue> issues)
    : Error(issues.empty() ? Errc::InvalidArgument : issues.front().code, describe(issues)),
      issues_(std::move(issues)) {}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace memefuse
