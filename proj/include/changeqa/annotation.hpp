#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace changeqa {

enum class Verdict { agree, disagree };

struct AnnotationRecord {
  std::string sample_id;
  std::string annotator_id;
  Verdict verdict = Verdict::agree;
  int difficulty = 1;  // 1 very simple, 2 simple, 3 hard
  std::optional<std::string> alternative;
  std::string timestamp;  // ISO 8601 UTC, set by the server

  bool operator==(const AnnotationRecord&) const = default;
};

nlohmann::ordered_json to_json(const AnnotationRecord& record);
/// Errc::schema on missing fields, unknown verdicts or difficulty outside 1..3.
/// A missing timestamp is accepted and left empty.
AnnotationRecord annotation_from_json(const nlohmann::json& j);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& jsonl);
std::string utc_timestamp_now();

/// Append-only JSONL store. Every append is written and fsync'ed before it
/// is acknowledged; writers are serialised by a mutex. Opening an existing
/// file replays it.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path path);
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  /// False (nothing written) when (sample_id, annotator_id) already exists.
  bool append(const AnnotationRecord& record);
  std::vector<AnnotationRecord> snapshot() const;
  bool contains(const std::string& sample_id, const std::string& annotator_id) const;
  std::size_t count_for(const std::string& sample_id) const;
  std::string export_jsonl() const;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::vector<AnnotationRecord> records_;
  std::set<std::pair<std::string, std::string>> keys_;
  std::map<std::string, std::size_t> per_sample_;
};

struct SampleAgreement {
  std::string sample_id;
  bool unanimous = false;  // A_n
  double weight = 1.0;     // d_n, 1 for retained samples
};

struct AgreementReport {
  int panel_size = 3;
  std::vector<SampleAgreement> samples;  // scored samples, by sample_id
  std::vector<std::string> incomplete;   // fewer than panel_size verdicts
  std::optional<double> human_agreement;  // mean A_n; empty when nothing is scored
  std::optional<double> precision;        // sum d*A / sum d
};

/// A sample is scored once it has panel_size verdicts; only the first
/// panel_size records per sample (store order) count. Weights default to 1.
AgreementReport unanimity_agreement(std::span<const AnnotationRecord> records, int panel_size = 3,
                                    const std::map<std::string, double>& weights = {});

nlohmann::ordered_json to_json(const AgreementReport& report);

}  // namespace changeqa
