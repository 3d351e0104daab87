#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace changeqa {

/// Dense real vector; all entries finite, dim > 0.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double norm() const;

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<double> values_;
};

enum class Metric { cosine_sim, l1, l2, wasserstein1d };

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view name);

/// Errc::undefined_similarity if either vector is zero, Errc::shape on dim mismatch.
double cosine(const Embedding& a, const Embedding& b);

/// cosine_sim is a similarity (higher = closer); the others are distances.
/// wasserstein1d is the 1-D optimal-transport cost between the empirical
/// coordinate distributions, i.e. mean |sorted(a) - sorted(b)|.
double distance(const Embedding& a, const Embedding& b, Metric metric);

double l2_distance(const Embedding& a, const Embedding& b);

}  // namespace changeqa
