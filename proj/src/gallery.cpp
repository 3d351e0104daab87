#include "changeqa/gallery.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>

#include "changeqa/error.hpp"
#include "changeqa/png_io.hpp"

namespace changeqa {

using nlohmann::json;

Gallery::Gallery(std::vector<Exemplar> exemplars) : exemplars_(std::move(exemplars)) {
  if (!exemplars_.empty()) dim_ = exemplars_.front().embedding.dim();
  for (const auto& e : exemplars_) {
    require(e.embedding.dim() == dim_, Errc::shape, "exemplar '" + e.id + "' has a different embedding dim");
    require(!e.score || (*e.score >= 1 && *e.score <= 5), Errc::schema, "exemplar '" + e.id + "' score outside 1..5");
  }
}

Gallery Gallery::load(const std::filesystem::path& manifest, const ClassMap& classes, const EncoderBackend& enc) {
  std::ifstream in(manifest);
  if (!in) fail(Errc::io, "cannot open gallery manifest " + manifest.string());
  const auto base = manifest.parent_path();
  std::vector<Exemplar> exemplars;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(Errc::format, where + ": " + e.what());
    }
    if (!j.contains("id") || !j.contains("class") || !j.contains("image")) {
      fail(Errc::schema, where + ": gallery rows need id, class and image");
    }
    Exemplar ex;
    ex.id = j["id"].get<std::string>();
    const auto& cls = j["class"];
    ex.group = cls.is_number_integer() ? cls.get<int>() : classes.index_of(cls.get<std::string>());
    require(ex.group >= 0 && ex.group < classes.size(), Errc::schema, where + ": class out of range");
    ex.caption = j.value("caption", "");
    if (j.contains("score") && !j["score"].is_null()) ex.score = j["score"].get<int>();
    ex.image = base / j["image"].get<std::string>();
    ex.embedding = enc.embed_image(load_image_png(ex.image));
    exemplars.push_back(std::move(ex));
  }
  return Gallery(std::move(exemplars));
}

std::size_t Gallery::group_size(int group) const {
  return static_cast<std::size_t>(
      std::count_if(exemplars_.begin(), exemplars_.end(), [&](const Exemplar& e) { return e.group == group; }));
}

std::vector<Exemplar> Gallery::retrieve_topk(const Embedding& query, std::size_t r,
                                             std::optional<int> restrict_group) const {
  struct Scored {
    double sim;
    const Exemplar* ex;
  };
  std::vector<Scored> pool;
  for (const auto& e : exemplars_) {
    if (restrict_group && e.group != *restrict_group) continue;
    pool.push_back({cosine(query, e.embedding), &e});
  }
  if (pool.empty()) {
    fail(Errc::no_exemplars, restrict_group ? "no exemplars in group " + std::to_string(*restrict_group)
                                            : std::string("gallery is empty"));
  }
  const std::size_t n = std::min(r, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n), pool.end(),
                    [](const Scored& a, const Scored& b) {
                      if (a.sim != b.sim) return a.sim > b.sim;
                      return a.ex->id < b.ex->id;
                    });
  std::vector<Exemplar> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(*pool[i].ex);
  return out;
}

GroupDiagnostics Gallery::group_diagnostics(const Embedding& query, int group) const {
  double delta_in = -1.0;
  double delta_out = std::numeric_limits<double>::infinity();
  bool has_out = false;
  for (const auto& e : exemplars_) {
    const double d = l2_distance(query, e.embedding);
    if (e.group == group) {
      delta_in = std::max(delta_in, d);
    } else {
      delta_out = std::min(delta_out, d);
      has_out = true;
    }
  }
  if (delta_in < 0.0 || !has_out) {
    fail(Errc::diagnostics_unavailable, "group " + std::to_string(group) + " needs in-group and out-group exemplars");
  }
  return {delta_in, delta_out};
}

Embedding pooled_context(std::span<const Exemplar> set) {
  require(!set.empty(), Errc::contract, "pooled context of an empty set");
  std::vector<double> mean(set.front().embedding.dim(), 0.0);
  for (const auto& e : set) {
    require(e.embedding.dim() == mean.size(), Errc::shape, "exemplar dims differ");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += e.embedding[i];
  }
  for (auto& v : mean) v /= static_cast<double>(set.size());
  return Embedding(std::move(mean));
}

double context_shift(std::span<const Exemplar> set, const Embedding& query) {
  return l2_distance(pooled_context(set), query);
}

}  // namespace changeqa
