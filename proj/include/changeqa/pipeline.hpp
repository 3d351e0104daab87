#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "changeqa/config.hpp"
#include "changeqa/gallery.hpp"
#include "changeqa/judge.hpp"
#include "changeqa/qa.hpp"
#include "changeqa/regions.hpp"

namespace changeqa {

/// One manifest line. Paths are resolved against the manifest directory.
struct PairEntry {
  std::string pair_id;
  std::filesystem::path before_image;
  std::filesystem::path after_image;
  std::filesystem::path before_mask;
  std::filesystem::path after_mask;
};

/// JSONL {"pair_id","before_image","after_image","before_mask","after_mask"}.
/// Errc::schema on a malformed line or a repeated pair_id.
std::vector<PairEntry> load_pairs_manifest(const std::filesystem::path& path);

struct LoadedPair {
  std::string pair_id;
  RgbImage before;
  RgbImage after;
  SemanticMask before_mask;
  SemanticMask after_mask;
};

/// Decodes all four files; Errc::shape when their dimensions differ.
LoadedPair load_pair(const PairEntry& entry, int num_classes);

struct TrailStep {
  std::string stage;
  std::string decision;
  std::string detail;
};

/// Per-candidate record of every filter decision. The last step is the
/// terminal one, stage "result" with decision "kept" or "discarded".
struct CandidateTrail {
  std::string pair_id;
  int region_index = 0;
  int class_id = 0;  // class of the extracted region
  PixelRect bbox;
  std::size_t size = 0;
  double iou = 0.0;
  double changed_ratio = 0.0;
  bool kept = false;
  int label = 0;  // final class when kept
  std::vector<TrailStep> steps;
};

nlohmann::ordered_json to_json(const CandidateTrail& trail, const ClassMap& classes);

/// Counts per stage. Merging is a commutative monoid (field-wise sum).
struct StageStats {
  long long pairs_processed = 0;
  long long pairs_failed = 0;
  long long extracted_candidates = 0;  // passed the region gates
  long long rejected_patch = 0;
  long long total_candidates = 0;  // reached the encoder screen
  long long rejected_encoder = 0;
  long long directly_accepted = 0;
  long long forwarded_to_judge = 0;
  long long accepted_judge = 0;
  long long rejected_judge = 0;
  long long kept = 0;
  long long change_rows = 0;
  long long no_change_rows = 0;

  StageStats& operator+=(const StageStats& other);
  bool operator==(const StageStats&) const = default;
  /// Empty string when every identity holds, else a description of the first
  /// broken one.
  std::string identity_violation() const;
};

nlohmann::ordered_json to_json(const StageStats& stats);

/// Backends and shared state for a run; all members must outlive it.
struct PipelineContext {
  const PipelineConfig* config = nullptr;
  const EncoderBackend* encoder = nullptr;
  const JudgeBackend* judge = nullptr;
  const Gallery* gallery = nullptr;             // null: zero-shot judging
  const RemoteQaGenerator* qa_remote = nullptr;  // null: template QA only
};

enum class CandidateFate { rejected_patch, rejected_encoder, directly_accepted, accepted_judge, rejected_judge };

struct CandidateVerdict {
  CandidateFate fate = CandidateFate::rejected_encoder;
  int label = 0;
  std::vector<TrailStep> steps;  // without the terminal step

  bool kept() const { return fate == CandidateFate::directly_accepted || fate == CandidateFate::accepted_judge; }
};

/// Patch filter (if enabled), encoder screen and judge stages for one crop
/// pair. With force_judge every screen survivor is judged, as in the
/// random-crop audit.
CandidateVerdict evaluate_candidate(const RgbImage& before_crop, const RgbImage& after_crop, int expected_class,
                                    const PipelineContext& ctx, bool force_judge = false);

struct PairResult {
  std::string pair_id;
  std::vector<QARecord> rows;
  std::vector<CandidateTrail> trails;
  StageStats stats;
};

PairResult process_pair(const LoadedPair& pair, const PipelineContext& ctx);

struct PairFailure {
  std::string pair_id;
  std::string message;
};

struct RunResult {
  std::vector<QARecord> dataset;
  std::vector<CandidateTrail> trails;
  StageStats stats;
  std::vector<PairFailure> failures;
};

/// Processes pairs on config.jobs workers. A pair that fails to load or
/// process is reported in `failures` and contributes nothing else; output
/// order is manifest order regardless of worker count.
RunResult run_pipeline(const std::vector<PairEntry>& pairs, const PipelineContext& ctx);

/// dataset.jsonl, trails.jsonl and stats.json under out_dir.
void write_run_outputs(const RunResult& result, const ClassMap& classes, const std::filesystem::path& out_dir);

struct AuditResult {
  int n_crops = 0;
  int passed = 0;
  int rejected_patch = 0;
  int rejected_encoder = 0;
  int rejected_judge = 0;
  double pass_rate() const { return n_crops == 0 ? 0.0 : static_cast<double>(passed) / n_crops; }
};

nlohmann::ordered_json to_json(const AuditResult& audit);

/// Uniform seeded crops of audit.crop_size (clamped to the scene) drawn
/// regardless of masks. The hypothesis for each crop is the after-crop's best
/// non-skipped class; every screen survivor goes to the judge.
AuditResult random_crop_audit(const std::vector<PairEntry>& pairs, int n_crops, const PipelineContext& ctx);

}  // namespace changeqa
