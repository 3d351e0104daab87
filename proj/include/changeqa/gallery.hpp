#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "changeqa/class_map.hpp"
#include "changeqa/embedding.hpp"
#include "changeqa/encoder.hpp"

namespace changeqa {

/// Annotated reference patch. The group is the semantic class index.
struct Exemplar {
  std::string id;
  int group = 0;
  Embedding embedding;
  std::string caption;
  std::optional<int> score;    // 1..5 when annotated
  std::filesystem::path image;  // empty for synthetic exemplars
};

struct GroupDiagnostics {
  double delta_in = 0.0;   // max in-group distance to the query
  double delta_out = 0.0;  // min out-group distance to the query
};

/// Immutable exemplar store with exact linear-scan retrieval.
class Gallery {
 public:
  Gallery() = default;
  /// Errc::shape when embedding dims disagree.
  explicit Gallery(std::vector<Exemplar> exemplars);

  /// Reads the JSONL manifest ({"id","class","image","caption","score"?})
  /// and embeds each image with the encoder. `class` may be a name or an index.
  static Gallery load(const std::filesystem::path& manifest, const ClassMap& classes, const EncoderBackend& enc);

  bool empty() const { return exemplars_.empty(); }
  std::size_t size() const { return exemplars_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<Exemplar>& exemplars() const { return exemplars_; }
  std::size_t group_size(int group) const;

  /// Up to r exemplars by descending cosine, ties broken by id. With a group
  /// restriction only that group is searched. Errc::no_exemplars when the
  /// searched set is empty.
  std::vector<Exemplar> retrieve_topk(const Embedding& query, std::size_t r,
                                      std::optional<int> restrict_group = std::nullopt) const;

  /// Euclidean within-group diameter and out-group margin around the query.
  /// Errc::diagnostics_unavailable when either side has no exemplars.
  GroupDiagnostics group_diagnostics(const Embedding& query, int group) const;

 private:
  std::vector<Exemplar> exemplars_;
  std::size_t dim_ = 0;
};

/// Coordinate-wise mean of the exemplar embeddings. Errc::contract when empty.
Embedding pooled_context(std::span<const Exemplar> set);

/// || pooled_context(set) - query ||_2
double context_shift(std::span<const Exemplar> set, const Embedding& query);

}  // namespace changeqa
