#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "changeqa/class_map.hpp"
#include "changeqa/encoder.hpp"
#include "changeqa/judge.hpp"
#include "changeqa/patch_filter.hpp"
#include "changeqa/regions.hpp"
#include "changeqa/screen.hpp"

namespace changeqa {

enum class QType { yes_no, mcq, open };

std::string_view to_string(QType qtype);
std::optional<QType> parse_qtype(std::string_view name);

struct EncoderSettings {
  enum class Backend { mock, remote };
  Backend backend = Backend::mock;
  MockEncoderConfig mock;
  RemoteEncoderConfig remote;
};

struct JudgeBackendSettings {
  enum class Backend { mock, remote };
  Backend backend = Backend::mock;
  MockJudgeConfig mock;
  RemoteJudgeConfig remote;
};

struct QaSettings {
  enum class Generator { templated, remote };
  std::vector<QType> qtypes = {QType::yes_no, QType::mcq, QType::open};
  Generator generator = Generator::templated;
  int no_change_rows_per_pair = 1;
  double temperature = 0.9;
  int remote_attempts = 3;
  std::string remote_url;
  RetryPolicy retry;
};

struct AuditSettings {
  int crop_size = 64;
};

/// Everything a run needs. Built from a YAML file whose top-level sections
/// are `classes`, `seed`, `jobs`, `regions`, `crop`, `patch_filter`, `screen`,
/// `encoder`, `judge`, `gallery`, `qa`, `audit` and `pipeline`.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  ClassMap classes;
  RegionThresholds regions;
  int crop_margin = 16;
  bool patch_filter_enabled = false;
  PatchFilterConfig patch_filter;
  ScreenConfig screen;
  /// Reproduces the printed end-to-end algorithm, which keeps candidates
  /// whose class is NOT in the encoder top-k.
  bool keep_outside_topk = false;
  EncoderSettings encoder;
  JudgeSettings judge;
  BestOfNMode judge_mode = BestOfNMode::threshold;
  JudgeBackendSettings judge_backend;
  std::optional<std::filesystem::path> gallery_manifest;
  QaSettings qa;
  AuditSettings audit;

  /// Errc::config on the first invalid value.
  void validate() const;
};

/// Parses YAML text; relative paths resolve against base_dir.
PipelineConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

std::unique_ptr<EncoderBackend> make_encoder(const PipelineConfig& cfg);
std::unique_ptr<JudgeBackend> make_judge(const PipelineConfig& cfg);

/// Default text prompt for a class without an explicit `screen.prompts` entry.
std::string default_class_prompt(std::string_view class_name);

}  // namespace changeqa
