#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "changeqa/annotation.hpp"
#include "changeqa/pipeline.hpp"
#include "changeqa/qa.hpp"

namespace changeqa {

struct ReviewResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Request handling for the review API, independent of the HTTP layer.
class ReviewService {
 public:
  /// `pairs` maps pair ids to their image files for /img; `weights` holds
  /// d_n per sample for the precision figure (default 1).
  ReviewService(std::vector<QARecord> dataset, std::vector<PairEntry> pairs, AnnotationStore& store,
                int panel_size = 3, std::map<std::string, double> weights = {});

  /// Next sample for the annotator in dataset order: not yet served to them,
  /// not annotated by them, and still short of a full panel. 204 when none.
  ReviewResponse next_task(const std::string& annotator_id);
  /// 201 stored, 409 duplicate, 404 unknown sample, 400 invalid body.
  ReviewResponse submit(const std::string& body);
  ReviewResponse agreement() const;
  ReviewResponse export_annotations() const;
  /// which is "before" or "after".
  ReviewResponse image(const std::string& pair_id, const std::string& which) const;

 private:
  std::vector<QARecord> dataset_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, PairEntry> pairs_;
  AnnotationStore& store_;
  int panel_size_;
  std::map<std::string, double> weights_;
  std::mutex mu_;
  std::map<std::string, std::set<std::string>> served_;  // annotator -> sample ids
};

/// Task payload shown to annotators; carries no pipeline provenance.
nlohmann::ordered_json task_payload(const QARecord& record);

/// HTTP front end (cpp-httplib). Routes: GET /api/tasks/next, POST
/// /api/annotations, GET /api/agreement, GET /api/export,
/// GET /img/{pair}/{before|after}.png and static files from ui_dir under /.
class ReviewServer {
 public:
  ReviewServer(ReviewService& service, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~ReviewServer();
  /// Binds (port 0 picks a free port) and returns the port; Errc::io on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace changeqa
