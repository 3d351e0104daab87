#include "changeqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "changeqa/error.hpp"
#include "changeqa/hashing.hpp"
#include "changeqa/patch_filter.hpp"
#include "changeqa/png_io.hpp"
#include "changeqa/screen.hpp"

namespace changeqa {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string join_ints(const std::vector<int>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out + "]";
}

std::string rank_of(const std::vector<ClassScore>& ranking, int class_id) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i].class_id == class_id) {
      return std::to_string(i + 1) + " sim=" + fixed4(ranking[i].similarity);
    }
  }
  return "none";
}

const PipelineConfig& config_of(const PipelineContext& ctx) {
  require(ctx.config && ctx.encoder && ctx.judge, Errc::contract, "pipeline context needs config, encoder and judge");
  return *ctx.config;
}

CandidateVerdict judge_path(const RgbImage& before_crop, const RgbImage& after_crop, int expected_class,
                            const ScreenResult& screened, const PipelineContext& ctx, CandidateVerdict verdict) {
  const auto& cfg = *ctx.config;
  const auto& classes = cfg.classes;

  if (screened.no_change_suspect) {
    // The class already being visible before the change marks a false change.
    const JudgeQuery query{before_crop, expected_class, classes.name(expected_class)};
    const auto outcome = judge_query(query, cfg.judge, *ctx.judge, ctx.gallery, *ctx.encoder);
    const bool confirmed = outcome.score > cfg.judge.tau;
    verdict.steps.push_back({"judge_no_change", confirmed ? "confirmed" : "refuted",
                             "score=" + std::to_string(outcome.score)});
    if (confirmed) {
      verdict.fate = CandidateFate::rejected_judge;
      return verdict;
    }
  }

  std::vector<JudgeQuery> hypotheses{{after_crop, expected_class, classes.name(expected_class)}};
  for (const auto& cs : screened.after_ranking) {
    if (static_cast<int>(hypotheses.size()) >= cfg.judge.n) break;
    if (cs.class_id == expected_class || cfg.regions.skip_classes.contains(cs.class_id)) continue;
    hypotheses.push_back({after_crop, cs.class_id, classes.name(cs.class_id)});
  }
  const auto result = best_of_n(hypotheses, cfg.judge, *ctx.judge, ctx.gallery, *ctx.encoder);

  std::vector<int> ids;
  for (const auto& h : hypotheses) ids.push_back(h.class_id);
  std::string detail = "hypotheses=" + join_ints(ids) + " scores=" + join_ints(result.scores);
  bool keep = false;
  int label = expected_class;
  if (cfg.judge_mode == BestOfNMode::threshold) {
    keep = std::find(result.retained.begin(), result.retained.end(), std::size_t{0}) != result.retained.end();
  } else {
    keep = result.scores[result.selected] > cfg.judge.tau;
    label = hypotheses[result.selected].class_id;
    detail += " selected=" + std::to_string(label);
  }
  verdict.steps.push_back({"judge", keep ? "accept" : "reject", detail});
  verdict.fate = keep ? CandidateFate::accepted_judge : CandidateFate::rejected_judge;
  verdict.label = label;
  return verdict;
}

ChangeDirection direction_of(const std::vector<Point>& pixels, int class_id, const LoadedPair& pair) {
  long long before = 0;
  long long after = 0;
  for (const auto& p : pixels) {
    before += pair.before_mask.at(p.x, p.y) == class_id;
    after += pair.after_mask.at(p.x, p.y) == class_id;
  }
  return after >= before ? ChangeDirection::appeared : ChangeDirection::disappeared;
}

}  // namespace

std::vector<PairEntry> load_pairs_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open pairs manifest " + path.string());
  const auto base = path.parent_path();
  const auto resolve = [&](const json& row, const char* key) {
    const fs::path p(row.at(key).get<std::string>());
    return p.is_absolute() ? p : base / p;
  };
  std::vector<PairEntry> out;
  std::set<std::string> seen;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto row = json::parse(line);
      PairEntry e;
      e.pair_id = row.at("pair_id").get<std::string>();
      e.before_image = resolve(row, "before_image");
      e.after_image = resolve(row, "after_image");
      e.before_mask = resolve(row, "before_mask");
      e.after_mask = resolve(row, "after_mask");
      require(!e.pair_id.empty(), Errc::schema, "empty pair_id");
      require(seen.insert(e.pair_id).second, Errc::schema, "duplicate pair_id '" + e.pair_id + "'");
      out.push_back(std::move(e));
    } catch (const json::exception& e) {
      fail(Errc::schema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

LoadedPair load_pair(const PairEntry& entry, int num_classes) {
  LoadedPair p;
  p.pair_id = entry.pair_id;
  p.before = load_image_png(entry.before_image);
  p.after = load_image_png(entry.after_image);
  p.before_mask = load_mask_png(entry.before_mask, num_classes);
  p.after_mask = load_mask_png(entry.after_mask, num_classes);
  const int w = p.before.width();
  const int h = p.before.height();
  for (auto [ww, hh] : {std::pair{p.after.width(), p.after.height()},
                        std::pair{p.before_mask.width(), p.before_mask.height()},
                        std::pair{p.after_mask.width(), p.after_mask.height()}}) {
    require(ww == w && hh == h, Errc::shape, "pair '" + p.pair_id + "': images and masks differ in size");
  }
  return p;
}

ordered_json to_json(const CandidateTrail& t, const ClassMap& classes) {
  ordered_json j;
  j["pair_id"] = t.pair_id;
  j["region_index"] = t.region_index;
  j["class"] = classes.name(t.class_id);
  j["bbox"] = ordered_json{{"x0", t.bbox.x0}, {"y0", t.bbox.y0}, {"w", t.bbox.w}, {"h", t.bbox.h}};
  j["size"] = t.size;
  j["iou"] = t.iou;
  j["changed_ratio"] = t.changed_ratio;
  j["kept"] = t.kept;
  j["label"] = t.kept ? ordered_json(classes.name(t.label)) : ordered_json(nullptr);
  auto steps = ordered_json::array();
  for (const auto& s : t.steps) steps.push_back(ordered_json{{"stage", s.stage}, {"decision", s.decision}, {"detail", s.detail}});
  j["trail"] = std::move(steps);
  return j;
}

StageStats& StageStats::operator+=(const StageStats& o) {
  pairs_processed += o.pairs_processed;
  pairs_failed += o.pairs_failed;
  extracted_candidates += o.extracted_candidates;
  rejected_patch += o.rejected_patch;
  total_candidates += o.total_candidates;
  rejected_encoder += o.rejected_encoder;
  directly_accepted += o.directly_accepted;
  forwarded_to_judge += o.forwarded_to_judge;
  accepted_judge += o.accepted_judge;
  rejected_judge += o.rejected_judge;
  kept += o.kept;
  change_rows += o.change_rows;
  no_change_rows += o.no_change_rows;
  return *this;
}

std::string StageStats::identity_violation() const {
  for (long long v : {pairs_processed, pairs_failed, extracted_candidates, rejected_patch, total_candidates,
                      rejected_encoder, directly_accepted, forwarded_to_judge, accepted_judge, rejected_judge, kept,
                      change_rows, no_change_rows}) {
    if (v < 0) return "negative count";
  }
  if (total_candidates != extracted_candidates - rejected_patch) return "total != extracted - rejected_patch";
  if (forwarded_to_judge != total_candidates - rejected_encoder - directly_accepted) {
    return "forwarded != total - rejected_encoder - directly_accepted";
  }
  if (accepted_judge + rejected_judge != forwarded_to_judge) return "accepted_judge + rejected_judge != forwarded";
  if (kept != directly_accepted + accepted_judge) return "kept != directly_accepted + accepted_judge";
  return {};
}

ordered_json to_json(const StageStats& s) {
  return ordered_json{{"pairs_processed", s.pairs_processed},
                      {"pairs_failed", s.pairs_failed},
                      {"extracted_candidates", s.extracted_candidates},
                      {"rejected_patch", s.rejected_patch},
                      {"total_candidates", s.total_candidates},
                      {"rejected_encoder", s.rejected_encoder},
                      {"directly_accepted", s.directly_accepted},
                      {"forwarded_to_judge", s.forwarded_to_judge},
                      {"accepted_judge", s.accepted_judge},
                      {"rejected_judge", s.rejected_judge},
                      {"kept", s.kept},
                      {"change_rows", s.change_rows},
                      {"no_change_rows", s.no_change_rows}};
}

CandidateVerdict evaluate_candidate(const RgbImage& before_crop, const RgbImage& after_crop, int expected_class,
                                    const PipelineContext& ctx, bool force_judge) {
  const auto& cfg = config_of(ctx);
  CandidateVerdict verdict;
  verdict.label = expected_class;

  if (cfg.patch_filter_enabled) {
    const auto vb = keep_patch(before_crop, cfg.patch_filter);
    const auto va = keep_patch(after_crop, cfg.patch_filter);
    const bool keep = vb == PatchVerdict::keep && va == PatchVerdict::keep;
    verdict.steps.push_back({"patch_filter", keep ? "keep" : "reject",
                             "before=" + std::string(to_string(vb)) + " after=" + std::string(to_string(va))});
    if (!keep) {
      verdict.fate = CandidateFate::rejected_patch;
      return verdict;
    }
  }

  const auto screened = screen(before_crop, after_crop, expected_class, cfg.screen, *ctx.encoder);
  verdict.steps.push_back({"screen", std::string(to_string(screened.decision)),
                           "after_rank=" + rank_of(screened.after_ranking, expected_class) +
                               " before_rank=" + rank_of(screened.before_ranking, expected_class) +
                               " crop_sim=" + fixed4(screened.crop_similarity) +
                               (screened.no_change_suspect ? " no_change_suspect" : "")});

  if (cfg.keep_outside_topk && !force_judge) {
    if (screened.decision == ScreenDecision::discard) {
      verdict.fate = CandidateFate::directly_accepted;
      return verdict;
    }
    return judge_path(before_crop, after_crop, expected_class, screened, ctx, std::move(verdict));
  }

  if (screened.decision == ScreenDecision::discard) {
    verdict.fate = CandidateFate::rejected_encoder;
    return verdict;
  }
  if (screened.decision == ScreenDecision::accept && !screened.no_change_suspect && !force_judge) {
    verdict.fate = CandidateFate::directly_accepted;
    return verdict;
  }
  return judge_path(before_crop, after_crop, expected_class, screened, ctx, std::move(verdict));
}

PairResult process_pair(const LoadedPair& pair, const PipelineContext& ctx) {
  const auto& cfg = config_of(ctx);
  PairResult out;
  out.pair_id = pair.pair_id;
  out.stats.pairs_processed = 1;

  const auto diff = diff_mask(pair.before_mask, pair.after_mask);
  const auto regions = extract_candidates(pair.before_mask, pair.after_mask, diff, cfg.regions);
  const int width = pair.before.width();
  const int height = pair.before.height();

  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& region = regions[i];
    const auto before_crop = crop(pair.before, region.bbox, cfg.crop_margin);
    const auto after_crop = crop(pair.after, region.bbox, cfg.crop_margin);
    auto verdict = evaluate_candidate(before_crop, after_crop, region.class_id, ctx);

    CandidateTrail trail;
    trail.pair_id = pair.pair_id;
    trail.region_index = static_cast<int>(i);
    trail.class_id = region.class_id;
    trail.bbox = region.bbox;
    trail.size = region.size();
    trail.iou = region.iou;
    trail.changed_ratio = region.changed_ratio;
    trail.steps.push_back({"regions", "pass",
                           "size=" + std::to_string(region.size()) + " iou=" + fixed4(region.iou) +
                               " changed=" + fixed4(region.changed_ratio)});
    for (auto& s : verdict.steps) trail.steps.push_back(std::move(s));
    trail.kept = verdict.kept();
    trail.label = verdict.label;

    auto& st = out.stats;
    ++st.extracted_candidates;
    std::string stage;
    switch (verdict.fate) {
      case CandidateFate::rejected_patch:
        ++st.rejected_patch;
        stage = "patch_filter";
        break;
      case CandidateFate::rejected_encoder:
        ++st.total_candidates;
        ++st.rejected_encoder;
        stage = "screen";
        break;
      case CandidateFate::directly_accepted:
        ++st.total_candidates;
        ++st.directly_accepted;
        break;
      case CandidateFate::accepted_judge:
        ++st.total_candidates;
        ++st.forwarded_to_judge;
        ++st.accepted_judge;
        break;
      case CandidateFate::rejected_judge:
        ++st.total_candidates;
        ++st.forwarded_to_judge;
        ++st.rejected_judge;
        stage = "judge";
        break;
    }
    trail.steps.push_back({"result", trail.kept ? "kept" : "discarded", trail.kept ? "" : "stage=" + stage});

    if (trail.kept) {
      ++st.kept;
      QaSubject subject;
      subject.pair_id = pair.pair_id;
      subject.bbox = region.bbox;
      subject.image_width = width;
      subject.image_height = height;
      subject.class_id = trail.label;
      subject.direction = direction_of(region.pixels, region.class_id, pair);
      for (QType q : cfg.qa.qtypes) {
        subject.sample_id = pair.pair_id + "-r" + std::to_string(i) + "-" + std::string(to_string(q));
        out.rows.push_back(generate_qa(subject, q, cfg.classes, cfg.regions.skip_classes, cfg.seed, ctx.qa_remote,
                                       QaImages{&pair.before, &pair.after}));
        ++st.change_rows;
      }
    }
    out.trails.push_back(std::move(trail));
  }

  if (out.stats.kept == 0 && cfg.qa.no_change_rows_per_pair > 0) {
    std::mt19937_64 rng(mix_seed(cfg.seed, pair.pair_id + "/no-change"));
    const auto start = uniform_index(rng, cfg.qa.qtypes.size());
    QaSubject subject;
    subject.pair_id = pair.pair_id;
    subject.bbox = PixelRect{0, 0, width, height};
    subject.image_width = width;
    subject.image_height = height;
    for (int r = 0; r < cfg.qa.no_change_rows_per_pair; ++r) {
      const QType q = cfg.qa.qtypes[(start + static_cast<std::size_t>(r)) % cfg.qa.qtypes.size()];
      subject.sample_id = pair.pair_id + "-nc" + std::to_string(r) + "-" + std::string(to_string(q));
      out.rows.push_back(generate_qa(subject, q, cfg.classes, cfg.regions.skip_classes, cfg.seed, ctx.qa_remote,
                                     QaImages{&pair.before, &pair.after}));
      ++out.stats.no_change_rows;
    }
  }
  return out;
}

RunResult run_pipeline(const std::vector<PairEntry>& pairs, const PipelineContext& ctx) {
  const auto& cfg = config_of(ctx);
  struct Slot {
    std::optional<PairResult> result;
    std::string error;
  };
  std::vector<Slot> slots(pairs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      try {
        const auto loaded = load_pair(pairs[i], cfg.classes.size());
        slots[i].result = process_pair(loaded, ctx);
      } catch (const std::exception& e) {
        slots[i].error = e.what();
      }
    }
  };
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), std::max<std::size_t>(1, pairs.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  }

  RunResult run;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& slot = slots[i];
    if (!slot.result) {
      run.failures.push_back({pairs[i].pair_id, slot.error});
      ++run.stats.pairs_failed;
      continue;
    }
    run.stats += slot.result->stats;
    for (auto& r : slot.result->rows) run.dataset.push_back(std::move(r));
    for (auto& t : slot.result->trails) run.trails.push_back(std::move(t));
  }
  return run;
}

void write_run_outputs(const RunResult& result, const ClassMap& classes, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto open = [&](const char* name) {
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f) fail(Errc::io, "cannot write " + (out_dir / name).string());
    return f;
  };
  {
    auto f = open("dataset.jsonl");
    for (const auto& r : result.dataset) f << to_jsonl(r);
  }
  {
    auto f = open("trails.jsonl");
    for (const auto& t : result.trails) f << to_json(t, classes).dump() << '\n';
  }
  {
    auto f = open("stats.json");
    ordered_json j;
    j["stats"] = to_json(result.stats);
    auto failures = ordered_json::array();
    for (const auto& e : result.failures) failures.push_back(ordered_json{{"pair_id", e.pair_id}, {"error", e.message}});
    j["failures"] = std::move(failures);
    f << j.dump(2) << '\n';
  }
}

ordered_json to_json(const AuditResult& a) {
  return ordered_json{{"n_crops", a.n_crops},           {"passed", a.passed},
                      {"pass_rate", a.pass_rate()},     {"rejected_patch", a.rejected_patch},
                      {"rejected_encoder", a.rejected_encoder}, {"rejected_judge", a.rejected_judge}};
}

AuditResult random_crop_audit(const std::vector<PairEntry>& pairs, int n_crops, const PipelineContext& ctx) {
  const auto& cfg = config_of(ctx);
  require(n_crops >= 1, Errc::contract, "n_crops must be >= 1");
  require(!pairs.empty(), Errc::contract, "audit needs at least one pair");

  std::mt19937_64 rng(mix_seed(cfg.seed, "random-crop-audit"));
  std::map<std::size_t, LoadedPair> loaded;
  AuditResult out;
  out.n_crops = n_crops;
  for (int i = 0; i < n_crops; ++i) {
    const auto idx = static_cast<std::size_t>(uniform_index(rng, pairs.size()));
    auto it = loaded.find(idx);
    if (it == loaded.end()) it = loaded.emplace(idx, load_pair(pairs[idx], cfg.classes.size())).first;
    const auto& pair = it->second;
    const int w = std::min(cfg.audit.crop_size, pair.before.width());
    const int h = std::min(cfg.audit.crop_size, pair.before.height());
    const int x0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(pair.before.width() - w + 1)));
    const int y0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(pair.before.height() - h + 1)));
    const PixelRect rect{x0, y0, w, h};
    const auto before_crop = crop(pair.before, rect, 0);
    const auto after_crop = crop(pair.after, rect, 0);

    const auto ranking = rank_classes(after_crop, cfg.screen, *ctx.encoder);
    int hypothesis = -1;
    for (const auto& cs : ranking) {
      if (!cfg.regions.skip_classes.contains(cs.class_id)) {
        hypothesis = cs.class_id;
        break;
      }
    }
    if (hypothesis < 0) {
      ++out.rejected_encoder;
      continue;
    }
    const auto verdict = evaluate_candidate(before_crop, after_crop, hypothesis, ctx, true);
    switch (verdict.fate) {
      case CandidateFate::rejected_patch: ++out.rejected_patch; break;
      case CandidateFate::rejected_encoder: ++out.rejected_encoder; break;
      case CandidateFate::rejected_judge: ++out.rejected_judge; break;
      case CandidateFate::directly_accepted:
      case CandidateFate::accepted_judge: ++out.passed; break;
    }
  }
  return out;
}

}  // namespace changeqa
