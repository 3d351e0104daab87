#include "changeqa/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "changeqa/error.hpp"

namespace changeqa {

std::string_view to_string(QType qtype) {
  switch (qtype) {
    case QType::yes_no: return "yes_no";
    case QType::mcq: return "mcq";
    case QType::open: return "open";
  }
  return "unknown";
}

std::optional<QType> parse_qtype(std::string_view name) {
  for (QType q : {QType::yes_no, QType::mcq, QType::open}) {
    if (name == to_string(q)) return q;
  }
  return std::nullopt;
}

std::string default_class_prompt(std::string_view class_name) {
  return "a satellite image of a " + std::string(class_name);
}

namespace {

namespace fs = std::filesystem;

void check_keys(const YAML::Node& node, const std::string& section, std::initializer_list<std::string_view> allowed) {
  if (!node) return;
  require(node.IsMap(), Errc::config, "'" + section + "' must be a mapping");
  const std::set<std::string_view> keys(allowed);
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    require(keys.contains(key), Errc::config, "unknown key '" + (section.empty() ? key : section + "." + key) + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& section) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception& e) {
    fail(Errc::config, section + "." + key + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

int class_index(const ClassMap& classes, const YAML::Node& key, const std::string& where) {
  const auto name = key.as<std::string>();
  if (auto idx = classes.find(name)) return *idx;
  fail(Errc::config, where + ": unknown class '" + name + "'");
}

ClassMap read_classes(const YAML::Node& node, const fs::path& base) {
  require(static_cast<bool>(node), Errc::config, "config needs a 'classes' entry (class-map path or list)");
  if (node.IsScalar()) return ClassMap::load(resolve(base, node.as<std::string>()));
  require(node.IsSequence(), Errc::config, "'classes' must be a path or a list of names");
  return ClassMap(node.as<std::vector<std::string>>());
}

void read_regions(const YAML::Node& n, const ClassMap& classes, RegionThresholds& r) {
  check_keys(n, "regions",
             {"connectivity", "min_size", "min_size_overrides", "changed_threshold", "changed_overrides",
              "iou_threshold", "iou_direction", "skip_classes"});
  if (!n) return;
  int connectivity = 8;
  read(n, "connectivity", connectivity, "regions");
  require(connectivity == 4 || connectivity == 8, Errc::config, "regions.connectivity must be 4 or 8");
  r.connectivity = connectivity == 4 ? Connectivity::four : Connectivity::eight;
  read(n, "min_size", r.min_size, "regions");
  read(n, "changed_threshold", r.changed_threshold, "regions");
  read(n, "iou_threshold", r.iou_threshold, "regions");
  if (n["iou_direction"]) {
    const auto dir = n["iou_direction"].as<std::string>();
    if (dir == "reject_below") {
      r.iou_direction = IouDirection::reject_below;
    } else if (dir == "reject_above") {
      r.iou_direction = IouDirection::reject_above;
    } else {
      fail(Errc::config, "regions.iou_direction must be reject_below or reject_above");
    }
  }
  for (const auto& kv : n["min_size_overrides"]) {
    r.min_size_overrides[class_index(classes, kv.first, "regions.min_size_overrides")] = kv.second.as<int>();
  }
  for (const auto& kv : n["changed_overrides"]) {
    r.changed_overrides[class_index(classes, kv.first, "regions.changed_overrides")] = kv.second.as<double>();
  }
  for (const auto& c : n["skip_classes"]) r.skip_classes.insert(class_index(classes, c, "regions.skip_classes"));
}

Rgb read_rgb(const YAML::Node& node, const std::string& where) {
  const auto v = node.as<std::vector<int>>();
  require(v.size() == 3, Errc::config, where + ": colour must be [r, g, b]");
  Rgb out{};
  for (std::size_t i = 0; i < 3; ++i) {
    require(v[i] >= 0 && v[i] <= 255, Errc::config, where + ": colour components must be 0..255");
    out[i] = static_cast<std::uint8_t>(v[i]);
  }
  return out;
}

RetryPolicy read_retry(const YAML::Node& n, const std::string& section) {
  RetryPolicy policy;
  if (!n) return policy;
  int backoff_ms = static_cast<int>(policy.initial_backoff.count());
  int timeout_s = static_cast<int>(policy.timeout.count());
  read(n, "retries", policy.retries, section);
  read(n, "backoff_ms", backoff_ms, section);
  read(n, "timeout_s", timeout_s, section);
  require(policy.retries >= 0 && backoff_ms >= 0 && timeout_s > 0, Errc::config, section + ": invalid retry policy");
  policy.initial_backoff = std::chrono::milliseconds(backoff_ms);
  policy.timeout = std::chrono::seconds(timeout_s);
  return policy;
}

void read_encoder(const YAML::Node& n, const PipelineConfig& cfg, const fs::path& base, EncoderSettings& e) {
  check_keys(n, "encoder", {"backend", "mock", "remote"});
  if (!n) return;
  std::string backend = "mock";
  read(n, "backend", backend, "encoder");
  if (backend == "mock") {
    e.backend = EncoderSettings::Backend::mock;
  } else if (backend == "remote") {
    e.backend = EncoderSettings::Backend::remote;
  } else {
    fail(Errc::config, "encoder.backend must be mock or remote");
  }
  if (const auto m = n["mock"]) {
    check_keys(m, "encoder.mock", {"mode", "dim", "palette", "constant_image", "constant_text", "overrides"});
    std::string mode = "hash";
    read(m, "mode", mode, "encoder.mock");
    if (mode == "hash") {
      e.mock.mode = MockEncoderConfig::Mode::hash;
    } else if (mode == "palette") {
      e.mock.mode = MockEncoderConfig::Mode::palette;
    } else if (mode == "constant") {
      e.mock.mode = MockEncoderConfig::Mode::constant;
    } else {
      fail(Errc::config, "encoder.mock.mode must be hash, palette or constant");
    }
    read(m, "dim", e.mock.dim, "encoder.mock");
    if (m["palette"]) {
      e.mock.palette.assign(static_cast<std::size_t>(cfg.classes.size()), Rgb{0, 0, 0});
      std::vector<bool> seen(static_cast<std::size_t>(cfg.classes.size()), false);
      for (const auto& kv : m["palette"]) {
        const int k = class_index(cfg.classes, kv.first, "encoder.mock.palette");
        e.mock.palette[static_cast<std::size_t>(k)] = read_rgb(kv.second, "encoder.mock.palette");
        seen[static_cast<std::size_t>(k)] = true;
      }
      for (std::size_t k = 0; k < seen.size(); ++k) {
        require(seen[k], Errc::config, "encoder.mock.palette lacks class '" + cfg.classes.name(static_cast<int>(k)) + "'");
      }
    }
    read(m, "constant_image", e.mock.constant_image, "encoder.mock");
    read(m, "constant_text", e.mock.constant_text, "encoder.mock");
    if (m["overrides"]) e.mock.overrides = load_embedding_overrides(resolve(base, m["overrides"].as<std::string>()));
  }
  if (const auto r = n["remote"]) {
    check_keys(r, "encoder.remote", {"url", "cache_dir", "retries", "backoff_ms", "timeout_s"});
    read(r, "url", e.remote.url, "encoder.remote");
    if (r["cache_dir"]) e.remote.cache_dir = resolve(base, r["cache_dir"].as<std::string>());
    e.remote.retry = read_retry(r, "encoder.remote");
  }
}

void read_judge(const YAML::Node& n, const fs::path& base, PipelineConfig& cfg) {
  check_keys(n, "judge", {"backend", "tau", "n", "mode", "context_size", "few_shot", "mock", "remote"});
  if (!n) return;
  std::string backend = "mock";
  read(n, "backend", backend, "judge");
  if (backend == "mock") {
    cfg.judge_backend.backend = JudgeBackendSettings::Backend::mock;
  } else if (backend == "remote") {
    cfg.judge_backend.backend = JudgeBackendSettings::Backend::remote;
  } else {
    fail(Errc::config, "judge.backend must be mock or remote");
  }
  read(n, "tau", cfg.judge.tau, "judge");
  read(n, "n", cfg.judge.n, "judge");
  read(n, "context_size", cfg.judge.context_size, "judge");
  read(n, "few_shot", cfg.judge.few_shot, "judge");
  if (n["mode"]) {
    const auto mode = n["mode"].as<std::string>();
    if (mode == "threshold") {
      cfg.judge_mode = BestOfNMode::threshold;
    } else if (mode == "argmax") {
      cfg.judge_mode = BestOfNMode::argmax;
    } else {
      fail(Errc::config, "judge.mode must be threshold or argmax");
    }
  }
  if (const auto m = n["mock"]) {
    auto& mock = cfg.judge_backend.mock;
    check_keys(m, "judge.mock",
               {"mode", "score", "default_score", "table", "accept_fraction", "high_score", "low_score"});
    std::string mode = "pinned";
    read(m, "mode", mode, "judge.mock");
    if (mode == "pinned") {
      mock.mode = MockJudgeConfig::Mode::pinned;
    } else if (mode == "table") {
      mock.mode = MockJudgeConfig::Mode::table;
    } else if (mode == "cosine") {
      mock.mode = MockJudgeConfig::Mode::cosine;
    } else if (mode == "bernoulli") {
      mock.mode = MockJudgeConfig::Mode::bernoulli;
    } else {
      fail(Errc::config, "judge.mock.mode must be pinned, table, cosine or bernoulli");
    }
    read(m, "score", mock.score, "judge.mock");
    read(m, "default_score", mock.default_score, "judge.mock");
    read(m, "accept_fraction", mock.accept_fraction, "judge.mock");
    read(m, "high_score", mock.high_score, "judge.mock");
    read(m, "low_score", mock.low_score, "judge.mock");
    if (m["table"]) mock.table = load_judge_table(resolve(base, m["table"].as<std::string>()));
  }
  if (const auto r = n["remote"]) {
    check_keys(r, "judge.remote", {"url", "retries", "backoff_ms", "timeout_s"});
    read(r, "url", cfg.judge_backend.remote.url, "judge.remote");
    cfg.judge_backend.remote.retry = read_retry(r, "judge.remote");
  }
}

void read_qa(const YAML::Node& n, QaSettings& qa) {
  check_keys(n, "qa",
             {"qtypes", "generator", "no_change_rows_per_pair", "temperature", "remote_attempts", "remote"});
  if (!n) return;
  if (n["qtypes"]) {
    qa.qtypes.clear();
    for (const auto& q : n["qtypes"]) {
      const auto parsed = parse_qtype(q.as<std::string>());
      require(parsed.has_value(), Errc::config, "qa.qtypes entries must be yes_no, mcq or open");
      qa.qtypes.push_back(*parsed);
    }
  }
  if (n["generator"]) {
    const auto g = n["generator"].as<std::string>();
    if (g == "template") {
      qa.generator = QaSettings::Generator::templated;
    } else if (g == "remote") {
      qa.generator = QaSettings::Generator::remote;
    } else {
      fail(Errc::config, "qa.generator must be template or remote");
    }
  }
  read(n, "no_change_rows_per_pair", qa.no_change_rows_per_pair, "qa");
  read(n, "temperature", qa.temperature, "qa");
  read(n, "remote_attempts", qa.remote_attempts, "qa");
  if (const auto r = n["remote"]) {
    check_keys(r, "qa.remote", {"url", "retries", "backoff_ms", "timeout_s"});
    read(r, "url", qa.remote_url, "qa.remote");
    qa.retry = read_retry(r, "qa.remote");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  require(classes.size() >= 1, Errc::config, "at least one class is required");
  require(jobs >= 1, Errc::config, "jobs must be >= 1");
  require(crop_margin >= 0, Errc::config, "crop.margin must be >= 0");
  regions.validate();
  patch_filter.validate();
  screen.validate();
  require(static_cast<int>(screen.class_prompts.size()) == classes.size(), Errc::config,
          "one screen prompt per class is required");
  judge.validate();
  require(!qa.qtypes.empty(), Errc::config, "qa.qtypes must not be empty");
  require(qa.no_change_rows_per_pair >= 0, Errc::config, "qa.no_change_rows_per_pair must be >= 0");
  require(qa.temperature > 0.0, Errc::config, "qa.temperature must be positive");
  require(qa.remote_attempts >= 1, Errc::config, "qa.remote_attempts must be >= 1");
  require(qa.generator != QaSettings::Generator::remote || !qa.remote_url.empty(), Errc::config,
          "qa.remote.url is required for the remote generator");
  require(audit.crop_size >= 1, Errc::config, "audit.crop_size must be >= 1");
  if (encoder.backend == EncoderSettings::Backend::remote) {
    require(!encoder.remote.url.empty(), Errc::config, "encoder.remote.url is required");
  }
  if (judge_backend.backend == JudgeBackendSettings::Backend::remote) {
    require(!judge_backend.remote.url.empty(), Errc::config, "judge.remote.url is required");
  }
}

PipelineConfig parse_config(std::string_view yaml, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    fail(Errc::config, std::string("invalid YAML: ") + e.what());
  }
  require(root.IsMap(), Errc::config, "config root must be a mapping");
  check_keys(root, "",
             {"classes", "seed", "jobs", "regions", "crop", "patch_filter", "screen", "encoder", "judge", "gallery",
              "qa", "audit", "pipeline"});

  PipelineConfig cfg;
  try {
    cfg.classes = read_classes(root["classes"], base_dir);
    read(root, "seed", cfg.seed, "");
    read(root, "jobs", cfg.jobs, "");
    read_regions(root["regions"], cfg.classes, cfg.regions);

    check_keys(root["crop"], "crop", {"margin"});
    read(root["crop"], "margin", cfg.crop_margin, "crop");

    const auto pf = root["patch_filter"];
    check_keys(pf, "patch_filter", {"enabled", "tau_std", "tau_sat", "tau_exg"});
    read(pf, "enabled", cfg.patch_filter_enabled, "patch_filter");
    read(pf, "tau_std", cfg.patch_filter.tau_std, "patch_filter");
    read(pf, "tau_sat", cfg.patch_filter.tau_sat, "patch_filter");
    read(pf, "tau_exg", cfg.patch_filter.tau_exg, "patch_filter");

    const auto sc = root["screen"];
    check_keys(sc, "screen", {"k", "tau_enc", "tau_sim", "prompts"});
    read(sc, "k", cfg.screen.k, "screen");
    read(sc, "tau_enc", cfg.screen.tau_enc, "screen");
    read(sc, "tau_sim", cfg.screen.tau_sim, "screen");
    cfg.screen.class_prompts.clear();
    for (const auto& name : cfg.classes.names()) cfg.screen.class_prompts.push_back(default_class_prompt(name));
    if (sc && sc["prompts"]) {
      for (const auto& kv : sc["prompts"]) {
        cfg.screen.class_prompts[static_cast<std::size_t>(class_index(cfg.classes, kv.first, "screen.prompts"))] =
            kv.second.as<std::string>();
      }
    }

    read_encoder(root["encoder"], cfg, base_dir, cfg.encoder);
    cfg.encoder.mock.class_prompts = cfg.screen.class_prompts;
    read_judge(root["judge"], base_dir, cfg);

    const auto gallery = root["gallery"];
    check_keys(gallery, "gallery", {"manifest"});
    if (gallery && gallery["manifest"]) cfg.gallery_manifest = resolve(base_dir, gallery["manifest"].as<std::string>());

    read_qa(root["qa"], cfg.qa);

    check_keys(root["audit"], "audit", {"crop_size"});
    read(root["audit"], "crop_size", cfg.audit.crop_size, "audit");

    check_keys(root["pipeline"], "pipeline", {"keep_outside_topk"});
    read(root["pipeline"], "keep_outside_topk", cfg.keep_outside_topk, "pipeline");
  } catch (const YAML::Exception& e) {
    fail(Errc::config, e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::unique_ptr<EncoderBackend> make_encoder(const PipelineConfig& cfg) {
  if (cfg.encoder.backend == EncoderSettings::Backend::remote) {
    return std::make_unique<RemoteEncoder>(cfg.encoder.remote);
  }
  return std::make_unique<MockEncoder>(cfg.encoder.mock);
}

std::unique_ptr<JudgeBackend> make_judge(const PipelineConfig& cfg) {
  if (cfg.judge_backend.backend == JudgeBackendSettings::Backend::remote) {
    return std::make_unique<RemoteJudge>(cfg.judge_backend.remote);
  }
  return std::make_unique<MockJudge>(cfg.judge_backend.mock);
}

}  // namespace changeqa
