#include "changeqa/review_server.hpp"

#include <httplib.h>

#include "changeqa/error.hpp"
#include "changeqa/png_io.hpp"

namespace changeqa {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ReviewResponse json_response(int status, const ordered_json& body) { return {status, body.dump(), "application/json"}; }

ReviewResponse error_response(int status, const std::string& message) {
  return json_response(status, ordered_json{{"error", message}});
}

}  // namespace

ordered_json task_payload(const QARecord& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["before_image_url"] = "/img/" + r.pair_id + "/before.png";
  j["after_image_url"] = "/img/" + r.pair_id + "/after.png";
  j["bbox"] = ordered_json{{"x0", r.bbox.x0}, {"y0", r.bbox.y0}, {"w", r.bbox.w}, {"h", r.bbox.h}};
  j["question"] = r.question;
  if (r.qtype == QType::mcq) j["options"] = r.options;
  j["answer"] = r.answer;
  return j;
}

ReviewService::ReviewService(std::vector<QARecord> dataset, std::vector<PairEntry> pairs, AnnotationStore& store,
                             int panel_size, std::map<std::string, double> weights)
    : dataset_(std::move(dataset)), store_(store), panel_size_(panel_size), weights_(std::move(weights)) {
  require(panel_size_ >= 1, Errc::config, "panel size must be >= 1");
  for (std::size_t i = 0; i < dataset_.size(); ++i) {
    require(by_id_.emplace(dataset_[i].sample_id, i).second, Errc::schema,
            "duplicate sample_id '" + dataset_[i].sample_id + "' in dataset");
  }
  for (auto& p : pairs) pairs_.emplace(p.pair_id, std::move(p));
  for (const auto& r : store_.snapshot()) served_[r.annotator_id].insert(r.sample_id);
}

ReviewResponse ReviewService::next_task(const std::string& annotator_id) {
  if (annotator_id.empty()) return error_response(400, "missing annotator");
  std::lock_guard lock(mu_);
  auto& served = served_[annotator_id];
  std::size_t done = 0;
  for (const auto& r : dataset_) done += store_.contains(r.sample_id, annotator_id) ? 1 : 0;
  for (const auto& r : dataset_) {
    if (served.contains(r.sample_id) || store_.contains(r.sample_id, annotator_id)) continue;
    if (store_.count_for(r.sample_id) >= static_cast<std::size_t>(panel_size_)) continue;
    served.insert(r.sample_id);
    auto payload = task_payload(r);
    payload["progress"] = ordered_json{{"done", done}, {"total", dataset_.size()}};
    return json_response(200, payload);
  }
  return {204, "", "application/json"};
}

ReviewResponse ReviewService::submit(const std::string& body) {
  AnnotationRecord record;
  try {
    record = annotation_from_json(json::parse(body));
  } catch (const json::exception& e) {
    return error_response(400, std::string("invalid JSON: ") + e.what());
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
  if (!by_id_.contains(record.sample_id)) return error_response(404, "unknown sample '" + record.sample_id + "'");
  record.timestamp = utc_timestamp_now();
  if (!store_.append(record)) return error_response(409, "sample already annotated by this annotator");
  return json_response(201, to_json(record));
}

ReviewResponse ReviewService::agreement() const {
  const auto records = store_.snapshot();
  return json_response(200, to_json(unanimity_agreement(records, panel_size_, weights_)));
}

ReviewResponse ReviewService::export_annotations() const { return {200, store_.export_jsonl(), "application/x-ndjson"}; }

ReviewResponse ReviewService::image(const std::string& pair_id, const std::string& which) const {
  const auto it = pairs_.find(pair_id);
  if (it == pairs_.end() || (which != "before" && which != "after")) return error_response(404, "no such image");
  const auto& path = which == "before" ? it->second.before_image : it->second.after_image;
  try {
    const auto bytes = read_file_bytes(path);
    return {200, std::string(bytes.begin(), bytes.end()), "image/png"};
  } catch (const Error& e) {
    return error_response(404, e.what());
  }
}

struct ReviewServer::Impl {
  ReviewService& service;
  httplib::Server server;
  explicit Impl(ReviewService& s) : service(s) {}
};

ReviewServer::ReviewServer(ReviewService& service, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& svr = impl_->server;
  const auto reply = [](httplib::Response& res, const ReviewResponse& r) {
    res.status = r.status;
    if (r.status != 204) res.set_content(r.body, r.content_type);
  };
  svr.Get("/api/tasks/next", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl_->service.next_task(req.get_param_value("annotator")));
  });
  svr.Post("/api/annotations", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl_->service.submit(req.body));
  });
  svr.Get("/api/agreement", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, impl_->service.agreement());
  });
  svr.Get("/api/export", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, impl_->service.export_annotations());
  });
  svr.Get(R"(/img/([^/]+)/(before|after)\.png)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl_->service.image(req.matches[1], req.matches[2]));
  });
  if (ui_dir) {
    require(svr.set_mount_point("/", ui_dir->string()), Errc::io, "cannot serve UI directory " + ui_dir->string());
  }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  auto& svr = impl_->server;
  const int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void ReviewServer::listen() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace changeqa
