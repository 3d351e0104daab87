#include "changeqa/class_map.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "changeqa/error.hpp"

namespace changeqa {

ClassMap::ClassMap(std::vector<std::string> names) : names_(std::move(names)) {
  require(!names_.empty() && names_.size() <= 256, Errc::schema, "class map must hold 1..256 classes");
}

ClassMap ClassMap::parse(std::string_view text) {
  std::vector<std::string> names;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      fail(Errc::format, "class map line " + std::to_string(line_no) + ": expected index<TAB>name");
    }
    int index = -1;
    const auto idx = line.substr(0, tab);
    const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), index);
    if (ec != std::errc{} || ptr != idx.data() + idx.size()) {
      fail(Errc::format, "class map line " + std::to_string(line_no) + ": bad index");
    }
    if (index != static_cast<int>(names.size())) {
      fail(Errc::schema, "class map indices must be contiguous from 0 (line " + std::to_string(line_no) + ")");
    }
    const auto name = line.substr(tab + 1);
    if (name.empty()) fail(Errc::format, "class map line " + std::to_string(line_no) + ": empty name");
    names.emplace_back(name);
  }
  return ClassMap(std::move(names));
}

ClassMap ClassMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open class map " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ClassMap::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out += std::to_string(i);
    out += '\t';
    out += names_[i];
    out += '\n';
  }
  return out;
}

const std::string& ClassMap::name(int index) const {
  require(index >= 0 && index < size(), Errc::schema, "class index " + std::to_string(index) + " out of range");
  return names_[static_cast<std::size_t>(index)];
}

std::optional<int> ClassMap::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

int ClassMap::index_of(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  fail(Errc::schema, "unknown class name '" + std::string(name) + "'");
}

}  // namespace changeqa
