#include "changeqa/error.hpp"

namespace changeqa {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::shape: return "shape error";
    case Errc::schema: return "schema error";
    case Errc::format: return "format error";
    case Errc::empty_region: return "empty-region error";
    case Errc::contract: return "contract violation";
    case Errc::undefined_similarity: return "undefined-similarity error";
    case Errc::backend: return "backend error";
    case Errc::protocol: return "protocol error";
    case Errc::no_exemplars: return "no-exemplars error";
    case Errc::diagnostics_unavailable: return "diagnostics-unavailable error";
    case Errc::degenerate_data: return "degenerate-data error";
    case Errc::incomplete_annotation: return "incomplete-annotation error";
    case Errc::generation: return "generation error";
    case Errc::io: return "io error";
    case Errc::config: return "config error";
  }
  return "error";
}

}  // namespace changeqa
