#include "changeqa/encoder.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "changeqa/error.hpp"
#include "changeqa/hashing.hpp"
#include "changeqa/png_io.hpp"

namespace changeqa {

using nlohmann::json;

std::string content_key(const RgbImage& image) {
  Sha256 h;
  h.update("image:" + std::to_string(image.width()) + "x" + std::to_string(image.height()) + ":");
  h.update(image.samples());
  return h.hex_digest();
}

std::string content_key(std::string_view text) {
  Sha256 h;
  h.update("text:");
  h.update(text);
  return h.hex_digest();
}

std::map<std::string, Embedding> load_embedding_overrides(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open embedding overrides " + path.string());
  std::map<std::string, Embedding> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.insert_or_assign(j.at("content_hash").get<std::string>(),
                           Embedding(j.at("values").get<std::vector<double>>()));
    } catch (const json::exception& e) {
      fail(Errc::format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

MockEncoder::MockEncoder(MockEncoderConfig cfg) : cfg_(std::move(cfg)) {
  switch (cfg_.mode) {
    case MockEncoderConfig::Mode::hash:
      require(cfg_.dim > 0, Errc::config, "mock encoder dim must be positive");
      break;
    case MockEncoderConfig::Mode::palette:
      require(!cfg_.palette.empty(), Errc::config, "palette mock encoder needs a palette");
      require(cfg_.class_prompts.size() == cfg_.palette.size(), Errc::config,
              "palette mock encoder needs one prompt per palette colour");
      cfg_.dim = static_cast<int>(cfg_.palette.size());
      break;
    case MockEncoderConfig::Mode::constant:
      require(!cfg_.constant_image.empty() && cfg_.constant_image.size() == cfg_.constant_text.size(),
              Errc::config, "constant mock encoder needs image and text vectors of equal dim");
      cfg_.dim = static_cast<int>(cfg_.constant_image.size());
      break;
  }
}

Embedding MockEncoder::hashed(const std::string& key) const {
  const auto digest = Sha256().update(key).digest();
  std::uint64_t state = 0;
  for (int i = 0; i < 8; ++i) state = (state << 8) | digest[static_cast<std::size_t>(i)];
  std::vector<double> v(static_cast<std::size_t>(cfg_.dim));
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = 2.0 * unit_double(splitmix64(state)) - 1.0;
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return Embedding(std::move(v));
}

int MockEncoder::nearest_class(const std::uint8_t* px) const {
  int best = 0;
  long best_d = -1;
  for (std::size_t k = 0; k < cfg_.palette.size(); ++k) {
    long d = 0;
    for (int c = 0; c < 3; ++c) {
      const long diff = static_cast<long>(px[c]) - cfg_.palette[k][static_cast<std::size_t>(c)];
      d += diff * diff;
    }
    if (best_d < 0 || d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

Embedding MockEncoder::embed_image(const RgbImage& image) const {
  const std::string key = content_key(image);
  if (auto it = cfg_.overrides.find(key); it != cfg_.overrides.end()) return it->second;
  switch (cfg_.mode) {
    case MockEncoderConfig::Mode::hash:
      return hashed(key);
    case MockEncoderConfig::Mode::constant:
      return Embedding(cfg_.constant_image);
    case MockEncoderConfig::Mode::palette: {
      require(!image.empty(), Errc::contract, "cannot embed an empty image");
      std::vector<double> hist(cfg_.palette.size(), 0.0);
      for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) hist[static_cast<std::size_t>(nearest_class(image.pixel(x, y)))] += 1.0;
      }
      double norm2 = 0.0;
      for (double h : hist) norm2 += h * h;
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& h : hist) h *= inv;
      return Embedding(std::move(hist));
    }
  }
  fail(Errc::contract, "unknown mock encoder mode");
}

Embedding MockEncoder::embed_text(std::string_view text) const {
  const std::string key = content_key(text);
  if (auto it = cfg_.overrides.find(key); it != cfg_.overrides.end()) return it->second;
  switch (cfg_.mode) {
    case MockEncoderConfig::Mode::hash:
      return hashed(key);
    case MockEncoderConfig::Mode::constant:
      return Embedding(cfg_.constant_text);
    case MockEncoderConfig::Mode::palette:
      for (std::size_t k = 0; k < cfg_.class_prompts.size(); ++k) {
        if (cfg_.class_prompts[k] == text) {
          std::vector<double> axis(cfg_.palette.size(), 0.0);
          axis[k] = 1.0;
          return Embedding(std::move(axis));
        }
      }
      return hashed(key);
  }
  fail(Errc::contract, "unknown mock encoder mode");
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(Errc::io, "cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::optional<Embedding> EmbeddingCache::get(const std::string& key) const {
  std::ifstream in(dir_ / key);
  if (!in) return std::nullopt;
  std::string tag;
  std::size_t dim = 0;
  if (!(in >> tag >> dim) || tag != "dim" || dim == 0) return std::nullopt;
  std::vector<double> values(dim);
  for (auto& v : values) {
    if (!(in >> v)) return std::nullopt;
  }
  return Embedding(std::move(values));
}

void EmbeddingCache::put(const std::string& key, const Embedding& value) const {
  static std::atomic<unsigned long> counter{0};
  std::ostringstream body;
  body << "dim " << value.dim() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < value.dim(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", value[i]);
    if (i > 0) body << ' ';
    body << buf;
  }
  body << '\n';
  const auto tmp = dir_ / (key + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(Errc::io, "cannot write cache entry " + tmp.string());
    out << body.str();
  }
  std::error_code ec;
  std::filesystem::rename(tmp, dir_ / key, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(Errc::io, "cannot publish cache entry " + key);
  }
}

Embedding parse_embed_reply(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    fail(Errc::protocol, std::string("embed reply is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("dim") || !j.contains("values") || !j["dim"].is_number_integer() ||
      !j["values"].is_array()) {
    fail(Errc::protocol, "embed reply must be {\"dim\":N,\"values\":[...]}");
  }
  std::vector<double> values;
  for (const auto& v : j["values"]) {
    if (!v.is_number()) fail(Errc::protocol, "embed reply has a non-numeric value");
    values.push_back(v.get<double>());
  }
  if (j["dim"].get<long long>() != static_cast<long long>(values.size()) || values.empty()) {
    fail(Errc::protocol, "embed reply dim disagrees with value count");
  }
  for (double v : values) {
    if (!std::isfinite(v)) fail(Errc::protocol, "embed reply has a non-finite value");
  }
  return Embedding(std::move(values));
}

RemoteEncoder::RemoteEncoder(RemoteEncoderConfig cfg) : cfg_(std::move(cfg)) {
  require(!cfg_.url.empty(), Errc::config, "remote encoder needs a url");
  if (cfg_.cache_dir) cache_.emplace(*cfg_.cache_dir);
}

Embedding RemoteEncoder::fetch(const std::string& key, std::string_view kind, const std::string& data) const {
  if (cache_) {
    if (auto hit = cache_->get(key)) return *hit;
  }
  const json request = {{"kind", kind}, {"data", data}};
  Embedding e = parse_embed_reply(post_json(cfg_.url, "/embed", request.dump(), cfg_.retry));
  if (cache_) cache_->put(key, e);
  return e;
}

Embedding RemoteEncoder::embed_image(const RgbImage& image) const {
  return fetch(content_key(image), "image", base64_encode(encode_png(image)));
}

Embedding RemoteEncoder::embed_text(std::string_view text) const {
  return fetch(content_key(text), "text", std::string(text));
}

}  // namespace changeqa
