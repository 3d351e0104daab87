#include "changeqa/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "changeqa/error.hpp"

namespace changeqa {

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  require(!values_.empty(), Errc::contract, "embedding must have dim > 0");
  for (double v : values_) require(std::isfinite(v), Errc::contract, "embedding has a non-finite entry");
}

double Embedding::norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::cosine_sim: return "cosine";
    case Metric::l1: return "l1";
    case Metric::l2: return "l2";
    case Metric::wasserstein1d: return "wasserstein";
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (Metric m : {Metric::cosine_sim, Metric::l1, Metric::l2, Metric::wasserstein1d}) {
    if (name == to_string(m)) return m;
  }
  if (name == "cosine_sim") return Metric::cosine_sim;
  if (name == "wasserstein1d") return Metric::wasserstein1d;
  return std::nullopt;
}

namespace {

void require_same_dim(const Embedding& a, const Embedding& b) {
  require(a.dim() == b.dim(), Errc::shape,
          "embedding dims differ: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
}

}  // namespace

double cosine(const Embedding& a, const Embedding& b) {
  require_same_dim(a, b);
  const double na = a.norm();
  const double nb = b.norm();
  require(na > 0.0 && nb > 0.0, Errc::undefined_similarity, "cosine similarity with a zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double l2_distance(const Embedding& a, const Embedding& b) {
  require_same_dim(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double distance(const Embedding& a, const Embedding& b, Metric metric) {
  require_same_dim(a, b);
  switch (metric) {
    case Metric::cosine_sim:
      return cosine(a, b);
    case Metric::l1: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.dim(); ++i) s += std::abs(a[i] - b[i]);
      return s;
    }
    case Metric::l2:
      return l2_distance(a, b);
    case Metric::wasserstein1d: {
      std::vector<double> sa(a.values().begin(), a.values().end());
      std::vector<double> sb(b.values().begin(), b.values().end());
      std::sort(sa.begin(), sa.end());
      std::sort(sb.begin(), sb.end());
      double s = 0.0;
      for (std::size_t i = 0; i < sa.size(); ++i) s += std::abs(sa[i] - sb[i]);
      return s / static_cast<double>(sa.size());
    }
  }
  fail(Errc::contract, "unknown metric");
}

}  // namespace changeqa
