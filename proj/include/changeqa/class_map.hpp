#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace changeqa {

/// Class index <-> name table. Text form: one `index<TAB>name` line per
/// class, indices contiguous from 0.
class ClassMap {
 public:
  ClassMap() = default;
  explicit ClassMap(std::vector<std::string> names);

  static ClassMap parse(std::string_view text);
  static ClassMap load(const std::filesystem::path& path);
  std::string serialize() const;

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const;
  std::optional<int> find(std::string_view name) const;
  /// Index for a name; Errc::schema if unknown.
  int index_of(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

}  // namespace changeqa
