#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "changeqa/embedding.hpp"
#include "changeqa/http_client.hpp"
#include "changeqa/raster.hpp"

namespace changeqa {

/// Image/text embedding capability. Implementations must be safe to call
/// from several threads at once.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  virtual Embedding embed_image(const RgbImage& image) const = 0;
  virtual Embedding embed_text(std::string_view text) const = 0;
};

/// Content keys: SHA-256 hex over a kind tag plus the payload bytes.
std::string content_key(const RgbImage& image);
std::string content_key(std::string_view text);

using Rgb = std::array<std::uint8_t, 3>;

struct MockEncoderConfig {
  enum class Mode {
    hash,      // pseudorandom unit vector seeded by the content key
    palette,   // class-colour histogram; prompts map to class axes
    constant,  // fixed image vector and fixed text vector
  };
  Mode mode = Mode::hash;
  int dim = 64;
  /// palette mode: one reference colour and one prompt per class.
  std::vector<Rgb> palette;
  std::vector<std::string> class_prompts;
  /// constant mode.
  std::vector<double> constant_image;
  std::vector<double> constant_text;
  /// Content key -> fixed embedding; consulted before the mode rule.
  std::map<std::string, Embedding> overrides;
};

/// Loads an override table: JSONL lines {"content_hash": hex, "values": [...]}.
std::map<std::string, Embedding> load_embedding_overrides(const std::filesystem::path& path);

/// Deterministic stand-in for a vision-language encoder.
class MockEncoder final : public EncoderBackend {
 public:
  explicit MockEncoder(MockEncoderConfig cfg);

  Embedding embed_image(const RgbImage& image) const override;
  Embedding embed_text(std::string_view text) const override;

  /// Index of the palette colour nearest to px (ties -> lower index).
  int nearest_class(const std::uint8_t* px) const;

 private:
  Embedding hashed(const std::string& key) const;

  MockEncoderConfig cfg_;
};

/// Disk cache: one file per content key; line 1 `dim N`, line 2 the values.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  std::optional<Embedding> get(const std::string& key) const;
  /// Write-then-rename, so concurrent writers of one key cannot tear a file.
  void put(const std::string& key, const Embedding& value) const;

 private:
  std::filesystem::path dir_;
};

struct RemoteEncoderConfig {
  std::string url;  // e.g. http://localhost:8080
  std::optional<std::filesystem::path> cache_dir;
  RetryPolicy retry;
};

/// Client for `POST /embed {"kind","data"}` -> `{"dim","values"}`.
class RemoteEncoder final : public EncoderBackend {
 public:
  explicit RemoteEncoder(RemoteEncoderConfig cfg);

  Embedding embed_image(const RgbImage& image) const override;
  Embedding embed_text(std::string_view text) const override;

 private:
  Embedding fetch(const std::string& key, std::string_view kind, const std::string& data) const;

  RemoteEncoderConfig cfg_;
  std::optional<EmbeddingCache> cache_;
};

/// Parses an /embed reply. Errc::protocol when fields are missing or the
/// declared dim disagrees with the value count.
Embedding parse_embed_reply(std::string_view body);

}  // namespace changeqa
