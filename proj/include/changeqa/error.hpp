#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace changeqa {

enum class Errc {
  shape,                   // raster dimensions disagree
  schema,                  // value outside the declared schema (class index, field set)
  format,                  // file encoding not accepted (bit depth, channels, syntax)
  empty_region,            // zero-area crop window
  contract,                // caller broke a precondition
  undefined_similarity,    // cosine with a zero vector
  backend,                 // encoder/judge/generator transport failure
  protocol,                // backend replied with something outside the protocol
  no_exemplars,            // retrieval over an empty (restricted) gallery
  diagnostics_unavailable, // in-group or out-group side missing
  degenerate_data,         // ROC input with a single class
  incomplete_annotation,   // rank data missing for a query
  generation,              // QA reply did not match the expected format
  io,                      // file could not be opened or written
  config,                  // invalid configuration value
};

std::string_view to_string(Errc code);

/// Single exception type for the library. The code identifies the failure
/// class so callers (and tests) can branch on it without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace changeqa
