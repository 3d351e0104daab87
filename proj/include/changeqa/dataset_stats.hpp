#pragma once

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "changeqa/qa.hpp"

namespace changeqa {

struct ClassCount {
  std::string name;
  long long count = 0;
  double percent = 0.0;  // share of change rows
};

/// Bin i counts values in [i * bin_width, (i + 1) * bin_width).
struct Histogram {
  int bin_width = 1;
  std::vector<long long> counts;

  void add(long long value);
};

struct DatasetReport {
  long long rows = 0;  // well-formed rows
  long long change_rows = 0;
  long long no_change_rows = 0;
  long long malformed_rows = 0;
  std::vector<std::string> malformed;  // "line N: reason"
  std::vector<ClassCount> classes;     // count desc, then name
  Histogram question_words{5, {}};
  Histogram question_chars{50, {}};
};

DatasetReport dataset_stats(std::span<const QARecord> records);
/// Reads JSONL; malformed lines are counted and listed, not fatal.
DatasetReport dataset_stats(std::istream& jsonl);
DatasetReport dataset_stats(const std::filesystem::path& jsonl);

std::size_t word_count(std::string_view text);
/// UTF-8 code points.
std::size_t char_count(std::string_view text);

std::string format_table(const DatasetReport& report);
nlohmann::ordered_json to_json(const DatasetReport& report);
/// `class,count,proportion` rows.
std::string class_csv(const DatasetReport& report);
/// `x,y` rows: bin lower edge, count.
std::string histogram_csv(const Histogram& histogram);

}  // namespace changeqa
