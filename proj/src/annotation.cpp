#include "changeqa/annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>

#include "changeqa/error.hpp"

namespace changeqa {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const AnnotationRecord& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["annotator_id"] = r.annotator_id;
  j["verdict"] = r.verdict == Verdict::agree ? "agree" : "disagree";
  j["difficulty"] = r.difficulty;
  if (r.alternative) j["alternative"] = *r.alternative;
  j["timestamp"] = r.timestamp;
  return j;
}

AnnotationRecord annotation_from_json(const json& j) {
  AnnotationRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.annotator_id = j.at("annotator_id").get<std::string>();
    const auto verdict = j.at("verdict").get<std::string>();
    if (verdict == "agree") {
      r.verdict = Verdict::agree;
    } else if (verdict == "disagree") {
      r.verdict = Verdict::disagree;
    } else {
      fail(Errc::schema, "verdict must be agree or disagree");
    }
    r.difficulty = j.at("difficulty").get<int>();
    if (j.contains("alternative") && !j.at("alternative").is_null()) {
      r.alternative = j.at("alternative").get<std::string>();
    }
    if (j.contains("timestamp")) r.timestamp = j.at("timestamp").get<std::string>();
  } catch (const json::exception& e) {
    fail(Errc::schema, std::string("malformed annotation: ") + e.what());
  }
  require(!r.sample_id.empty() && !r.annotator_id.empty(), Errc::schema, "annotation ids must be nonempty");
  require(r.difficulty >= 1 && r.difficulty <= 3, Errc::schema, "difficulty must be 1, 2 or 3");
  return r;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open annotations " + path.string());
  std::vector<AnnotationRecord> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(annotation_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(Errc::schema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AnnotationStore::AnnotationStore(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    for (auto& r : load_annotations(path_)) {
      // A replayed duplicate can only come from outside edits; first one wins.
      if (!keys_.emplace(r.sample_id, r.annotator_id).second) continue;
      ++per_sample_[r.sample_id];
      records_.push_back(std::move(r));
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) fail(Errc::io, "cannot open annotation store " + path_.string() + ": " + std::strerror(errno));
}

AnnotationStore::~AnnotationStore() {
  if (fd_ >= 0) ::close(fd_);
}

bool AnnotationStore::append(const AnnotationRecord& record) {
  const auto line = to_json(record).dump() + "\n";
  std::lock_guard lock(mu_);
  if (keys_.contains({record.sample_id, record.annotator_id})) return false;
  std::size_t written = 0;
  while (written < line.size()) {
    const auto n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::io, std::string("annotation store write failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) fail(Errc::io, std::string("annotation store fsync failed: ") + std::strerror(errno));
  keys_.emplace(record.sample_id, record.annotator_id);
  ++per_sample_[record.sample_id];
  records_.push_back(record);
  return true;
}

std::vector<AnnotationRecord> AnnotationStore::snapshot() const {
  std::lock_guard lock(mu_);
  return records_;
}

bool AnnotationStore::contains(const std::string& sample_id, const std::string& annotator_id) const {
  std::lock_guard lock(mu_);
  return keys_.contains({sample_id, annotator_id});
}

std::size_t AnnotationStore::count_for(const std::string& sample_id) const {
  std::lock_guard lock(mu_);
  const auto it = per_sample_.find(sample_id);
  return it == per_sample_.end() ? 0 : it->second;
}

std::string AnnotationStore::export_jsonl() const {
  std::string out;
  for (const auto& r : snapshot()) out += to_json(r).dump() + "\n";
  return out;
}

AgreementReport unanimity_agreement(std::span<const AnnotationRecord> records, int panel_size,
                                    const std::map<std::string, double>& weights) {
  require(panel_size >= 1, Errc::contract, "panel size must be >= 1");
  struct Tally {
    int seen = 0;
    bool all_agree = true;
  };
  std::map<std::string, Tally> tallies;
  for (const auto& r : records) {
    auto& t = tallies[r.sample_id];
    if (t.seen >= panel_size) continue;
    ++t.seen;
    t.all_agree = t.all_agree && r.verdict == Verdict::agree;
  }
  AgreementReport report;
  report.panel_size = panel_size;
  double agreed = 0.0;
  double weighted = 0.0;
  double weight_sum = 0.0;
  for (const auto& [id, t] : tallies) {
    if (t.seen < panel_size) {
      report.incomplete.push_back(id);
      continue;
    }
    const auto w = weights.find(id);
    SampleAgreement s{id, t.all_agree, w == weights.end() ? 1.0 : w->second};
    agreed += s.unanimous ? 1.0 : 0.0;
    weighted += s.unanimous ? s.weight : 0.0;
    weight_sum += s.weight;
    report.samples.push_back(std::move(s));
  }
  if (!report.samples.empty()) report.human_agreement = agreed / static_cast<double>(report.samples.size());
  if (weight_sum > 0.0) report.precision = weighted / weight_sum;
  return report;
}

ordered_json to_json(const AgreementReport& r) {
  auto samples = ordered_json::array();
  for (const auto& s : r.samples) {
    samples.push_back(ordered_json{{"sample_id", s.sample_id}, {"unanimous", s.unanimous}, {"weight", s.weight}});
  }
  const auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  return ordered_json{{"panel_size", r.panel_size},
                      {"scored_samples", r.samples.size()},
                      {"human_agreement", opt(r.human_agreement)},
                      {"precision", opt(r.precision)},
                      {"samples", samples},
                      {"incomplete", r.incomplete}};
}

}  // namespace changeqa
