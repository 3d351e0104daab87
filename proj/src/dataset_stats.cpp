#include "changeqa/dataset_stats.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "changeqa/error.hpp"

namespace changeqa {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string percent2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

class Accumulator {
 public:
  void add(const QARecord& r) {
    ++report_.rows;
    if (r.is_change) {
      ++report_.change_rows;
      ++per_class_[*r.class_name];
    } else {
      ++report_.no_change_rows;
    }
    report_.question_words.add(static_cast<long long>(word_count(r.question)));
    report_.question_chars.add(static_cast<long long>(char_count(r.question)));
  }

  void malformed(int line, const std::string& why) {
    ++report_.malformed_rows;
    report_.malformed.push_back("line " + std::to_string(line) + ": " + why);
  }

  DatasetReport finish() {
    for (const auto& [name, count] : per_class_) {
      report_.classes.push_back({name, count, 100.0 * static_cast<double>(count) / static_cast<double>(report_.change_rows)});
    }
    std::stable_sort(report_.classes.begin(), report_.classes.end(),
                     [](const ClassCount& a, const ClassCount& b) { return a.count > b.count; });
    return std::move(report_);
  }

 private:
  DatasetReport report_;
  std::map<std::string, long long> per_class_;
};

}  // namespace

void Histogram::add(long long value) {
  require(value >= 0 && bin_width > 0, Errc::contract, "histogram values must be nonnegative");
  const auto bin = static_cast<std::size_t>(value / bin_width);
  if (counts.size() <= bin) counts.resize(bin + 1, 0);
  ++counts[bin];
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::size_t char_count(std::string_view text) {
  return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

DatasetReport dataset_stats(std::span<const QARecord> records) {
  Accumulator acc;
  for (const auto& r : records) acc.add(r);
  return acc.finish();
}

DatasetReport dataset_stats(std::istream& in) {
  Accumulator acc;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      acc.add(qa_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      acc.malformed(lineno, e.what());
    } catch (const Error& e) {
      acc.malformed(lineno, e.what());
    }
  }
  return acc.finish();
}

DatasetReport dataset_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open dataset " + path.string());
  return dataset_stats(in);
}

std::string format_table(const DatasetReport& r) {
  std::ostringstream out;
  out << "rows " << r.rows << " (change " << r.change_rows << ", no-change " << r.no_change_rows << ")";
  if (r.malformed_rows > 0) out << ", malformed " << r.malformed_rows;
  out << "\n\n";
  std::size_t width = 5;
  for (const auto& c : r.classes) width = std::max(width, c.name.size());
  const auto pad = [&](const std::string& s) { return s + std::string(width - s.size() + 2, ' '); };
  out << pad("class") << "count  proportion\n";
  for (const auto& c : r.classes) out << pad(c.name) << c.count << "  " << percent2(c.percent) << "\n";
  const auto hist = [&](const char* title, const Histogram& h) {
    out << "\n" << title << " (bin " << h.bin_width << ")\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      out << "  " << i * static_cast<std::size_t>(h.bin_width) << "-"
          << (i + 1) * static_cast<std::size_t>(h.bin_width) - 1 << ": " << h.counts[i] << "\n";
    }
  };
  hist("question words", r.question_words);
  hist("question chars", r.question_chars);
  for (const auto& m : r.malformed) out << "malformed " << m << "\n";
  return out.str();
}

ordered_json to_json(const DatasetReport& r) {
  auto classes = ordered_json::array();
  for (const auto& c : r.classes) {
    classes.push_back(ordered_json{{"class", c.name}, {"count", c.count}, {"proportion", c.percent}});
  }
  const auto hist = [](const Histogram& h) {
    return ordered_json{{"bin_width", h.bin_width}, {"counts", h.counts}};
  };
  return ordered_json{{"rows", r.rows},
                      {"change_rows", r.change_rows},
                      {"no_change_rows", r.no_change_rows},
                      {"malformed_rows", r.malformed_rows},
                      {"malformed", r.malformed},
                      {"classes", classes},
                      {"question_words", hist(r.question_words)},
                      {"question_chars", hist(r.question_chars)}};
}

std::string class_csv(const DatasetReport& r) {
  std::string out = "class,count,proportion\n";
  for (const auto& c : r.classes) out += c.name + "," + std::to_string(c.count) + "," + percent2(c.percent) + "\n";
  return out;
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "x,y\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out += std::to_string(i * static_cast<std::size_t>(h.bin_width)) + "," + std::to_string(h.counts[i]) + "\n";
  }
  return out;
}

}  // namespace changeqa
