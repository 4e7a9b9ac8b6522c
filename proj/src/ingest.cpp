#include "chorus/ingest.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "chorus/error.hpp"

namespace chorus {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string_view role_name(ManifestRole role) { return role == ManifestRole::Train ? "TRAIN" : "TEST"; }

ManifestRole parse_role(std::string_view s) {
  if (s == "TRAIN") return ManifestRole::Train;
  if (s == "TEST") return ManifestRole::Test;
  throw Error(ErrorKind::InvalidArgument, "unknown manifest role '" + std::string(s) + "'");
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

json to_json(const RecordingMeta& m) {
  json j;
  j["recording_id"] = m.recording_id;
  j["species"] = m.species;
  j["quality"] = m.quality;
  j["background_species"] = m.background_species;
  j["duration_s"] = m.duration_s;
  j["audio_url"] = m.audio_url;
  put_optional(j, "local_path", m.local_path);
  put_optional(j, "wav_path", m.wav_path);
  put_optional(j, "sha256", m.sha256);
  put_optional(j, "download_error", m.download_error);
  return j;
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

RecordingMeta meta_from_json(const json& j) {
  RecordingMeta m;
  m.recording_id = j.at("recording_id").get<std::string>();
  m.species = j.at("species").get<std::string>();
  m.quality = j.value("quality", std::string());
  m.background_species = j.value("background_species", std::vector<std::string>{});
  m.duration_s = j.value("duration_s", 0.0);
  m.audio_url = j.value("audio_url", std::string());
  m.local_path = get_optional<std::string>(j, "local_path");
  m.wav_path = get_optional<std::string>(j, "wav_path");
  m.sha256 = get_optional<std::string>(j, "sha256");
  m.download_error = get_optional<std::string>(j, "download_error");
  return m;
}

std::string percent_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // including query
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidArgument, "bad URL " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string absolute_url(const std::string& url) {
  // The archive has served protocol-relative file links in the past.
  if (url.rfind("//", 0) == 0) return "https:" + url;
  return url;
}

httplib::Result http_get(const std::string& url, const ArchiveConfig& cfg) {
  const Url u = split_url(url);
  httplib::Client client(u.origin);
  client.set_follow_location(true);
  client.set_connection_timeout(cfg.timeout);
  client.set_read_timeout(cfg.timeout);
  return client.Get(u.path);
}

std::string page_url(const std::string& species, const QueryTerms& terms, const ArchiveConfig& cfg,
                     std::size_t page) {
  std::string query;
  const auto space = species.find(' ');
  if (space == std::string::npos) {
    query = "gen:" + species;
  } else {
    query = "gen:" + species.substr(0, space) + " sp:" + species.substr(space + 1);
  }
  if (!terms.quality.empty()) query += " q:" + terms.quality;
  std::string url = cfg.base_url + cfg.endpoint + "?query=" + percent_encode(query);
  if (!cfg.api_key.empty()) url += "&key=" + percent_encode(cfg.api_key);
  url += "&page=" + std::to_string(page);
  return url;
}

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_null()) return {};
  return v.dump();
}

std::string extension_of(const std::string& url) {
  const Url u = split_url(absolute_url(url));
  std::string path = u.path.substr(0, u.path.find('?'));
  const auto slash = path.rfind('/');
  const auto dot = path.rfind('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash) && path.size() - dot <= 5) {
    return path.substr(dot);
  }
  return ".mp3";
}

}  // namespace

bool QueryTerms::admits(const RecordingMeta& meta) const {
  if (!quality.empty() && meta.quality != quality) return false;
  if (background_none && !meta.background_species.empty()) return false;
  if (!species.empty() && std::find(species.begin(), species.end(), meta.species) == species.end()) {
    return false;
  }
  return true;
}

std::string write_manifest(const Manifest& manifest) {
  json header;
  header["manifest_version"] = 1;
  header["role"] = role_name(manifest.role);
  header["created_at"] = manifest.created_at;
  header["query_terms"] = {{"species", manifest.query_terms.species},
                           {"quality", manifest.query_terms.quality},
                           {"background_none", manifest.query_terms.background_none},
                           {"endpoint", manifest.query_terms.endpoint}};
  std::string out = header.dump() + "\n";
  for (const auto& e : manifest.entries) out += to_json(e).dump() + "\n";
  return out;
}

Manifest parse_manifest(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  Manifest m;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedHeader, "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (!j.contains("manifest_version")) {
          throw Error(ErrorKind::MalformedHeader, "manifest header missing");
        }
        m.role = parse_role(j.at("role").get<std::string>());
        m.created_at = j.value("created_at", std::string());
        const auto& q = j.at("query_terms");
        m.query_terms.species = q.value("species", std::vector<std::string>{});
        m.query_terms.quality = q.value("quality", std::string());
        m.query_terms.background_none = q.value("background_none", false);
        m.query_terms.endpoint = q.value("endpoint", std::string());
        have_header = true;
      } else {
        m.entries.push_back(meta_from_json(j));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedHeader, "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorKind::MalformedHeader, "empty manifest");
  return m;
}

void save_manifest_file(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << write_manifest(manifest);
}

Manifest load_manifest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

ArchiveConfig ArchiveConfig::from_env() {
  ArchiveConfig cfg;
  if (const char* url = std::getenv("CHORUS_ARCHIVE_URL"); url && *url) cfg.base_url = url;
  if (const char* key = std::getenv("XC_API_KEY"); key && *key) cfg.api_key = key;
  return cfg;
}

void RateLimiter::wait() {
  std::unique_lock lock(mutex_);
  const auto now = std::chrono::steady_clock::now();
  if (last_) {
    const auto next = *last_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double>(interval_));
    if (next > now) {
      std::this_thread::sleep_until(next);
      last_ = next;
      return;
    }
  }
  last_ = now;
}

double parse_duration(std::string_view text) {
  // "m:ss", "h:mm:ss" or plain seconds.
  double total = 0.0;
  std::string part;
  for (char c : std::string(text) + ":") {
    if (c == ':') {
      if (part.empty()) return 0.0;
      try {
        total = total * 60.0 + std::stod(part);
      } catch (const std::exception&) {
        return 0.0;
      }
      part.clear();
    } else {
      part.push_back(c);
    }
  }
  return total;
}

std::vector<std::string> plan_queries(const QueryTerms& terms, const ArchiveConfig& cfg) {
  std::vector<std::string> urls;
  for (const auto& sp : terms.species) urls.push_back(page_url(sp, terms, cfg, 1));
  return urls;
}

std::vector<RecordingMeta> parse_archive_page(std::string_view body, const ArchiveConfig& cfg,
                                              const QueryTerms& terms, std::size_t& num_pages) {
  const auto& f = cfg.fields;
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ArchiveSchemaChanged, std::string("response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains(f.recordings) || !doc[f.recordings].is_array()) {
    throw Error(ErrorKind::ArchiveSchemaChanged, "response has no '" + f.recordings + "' array");
  }
  num_pages = 1;
  if (doc.contains(f.num_pages)) {
    const auto& np = doc[f.num_pages];
    num_pages = np.is_string() ? std::stoul(np.get<std::string>()) : np.get<std::size_t>();
  }

  std::vector<RecordingMeta> out;
  for (const auto& rec : doc[f.recordings]) {
    for (const auto* key : {&f.id, &f.genus, &f.species, &f.quality, &f.file}) {
      if (!rec.contains(*key)) {
        throw Error(ErrorKind::ArchiveSchemaChanged, "recording lacks field '" + *key + "'");
      }
    }
    RecordingMeta m;
    m.recording_id = json_scalar(rec[f.id]);
    m.species = json_scalar(rec[f.genus]) + " " + json_scalar(rec[f.species]);
    m.quality = json_scalar(rec[f.quality]);
    if (rec.contains(f.background) && rec[f.background].is_array()) {
      for (const auto& b : rec[f.background]) {
        auto name = json_scalar(b);
        if (!name.empty()) m.background_species.push_back(name);
      }
    }
    if (rec.contains(f.length)) m.duration_s = parse_duration(json_scalar(rec[f.length]));
    m.audio_url = absolute_url(json_scalar(rec[f.file]));
    if (terms.admits(m)) out.push_back(std::move(m));
  }
  return out;
}

Manifest query_archive(const QueryTerms& terms, const ArchiveConfig& cfg, std::string created_at,
                       ManifestRole role) {
  if (terms.species.empty()) throw Error(ErrorKind::InvalidArgument, "species list is empty");
  Manifest manifest;
  manifest.role = role;
  manifest.created_at = std::move(created_at);
  manifest.query_terms = terms;
  manifest.query_terms.endpoint = cfg.endpoint;

  RateLimiter limiter(cfg.min_request_interval_s);
  std::map<std::string, RecordingMeta> by_id;
  for (const auto& sp : terms.species) {
    std::size_t pages = 1;
    for (std::size_t page = 1; page <= pages; ++page) {
      const std::string url = page_url(sp, terms, cfg, page);
      limiter.wait();
      auto res = http_get(url, cfg);
      if (!res) {
        throw Error(ErrorKind::NetworkError, url + ": " + httplib::to_string(res.error()));
      }
      if (res->status != 200) {
        throw Error(ErrorKind::NetworkError, url + ": HTTP " + std::to_string(res->status));
      }
      for (auto& m : parse_archive_page(res->body, cfg, terms, pages)) {
        by_id.emplace(m.recording_id, std::move(m));
      }
    }
  }
  for (auto& [id, m] : by_id) manifest.entries.push_back(std::move(m));
  return manifest;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

namespace {

std::optional<std::string> read_sidecar(const fs::path& p) {
  std::ifstream in(p);
  std::string s;
  if (!(in >> s)) return std::nullopt;
  return s;
}

void fetch_one(RecordingMeta& entry, const fs::path& dir, const ArchiveConfig& cfg,
               RateLimiter& limiter, FetchStats& stats, std::mutex& stats_mutex) {
  const fs::path target = dir / (entry.recording_id + extension_of(entry.audio_url));
  const fs::path sidecar = fs::path(target.string() + ".sha256");
  entry.wav_path = (dir / (entry.recording_id + ".wav")).string();
  auto bump = [&](std::size_t FetchStats::*field) {
    std::lock_guard lock(stats_mutex);
    ++(stats.*field);
  };

  if (fs::exists(target)) {
    auto recorded = read_sidecar(sidecar);
    if (recorded && *recorded == sha256_file(target.string())) {
      entry.local_path = target.string();
      entry.sha256 = *recorded;
      entry.download_error.reset();
      bump(&FetchStats::skipped);
      return;
    }
  }

  limiter.wait();
  auto res = http_get(absolute_url(entry.audio_url), cfg);
  std::string error;
  if (!res) {
    error = httplib::to_string(res.error());
  } else if (res->status != 200) {
    error = "HTTP " + std::to_string(res->status);
  }
  if (!error.empty()) {
    entry.download_error = error;
    entry.local_path.reset();
    bump(&FetchStats::failed);
    return;
  }

  const fs::path part = fs::path(target.string() + ".part");
  {
    std::ofstream out(part, std::ios::binary);
    out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
    if (!out) {
      entry.download_error = "cannot write " + part.string();
      bump(&FetchStats::failed);
      return;
    }
  }
  fs::rename(part, target);
  const std::string digest = sha256_file(target.string());
  std::ofstream(sidecar) << digest << "\n";
  entry.local_path = target.string();
  entry.sha256 = digest;
  entry.download_error.reset();
  bump(&FetchStats::downloaded);
}

}  // namespace

Manifest fetch_audio(Manifest manifest, const std::string& dest_dir, const ArchiveConfig& cfg,
                     FetchStats* stats) {
  const fs::path dir(dest_dir);
  fs::create_directories(dir);
  RateLimiter limiter(cfg.min_request_interval_s);
  FetchStats local;
  std::mutex stats_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < manifest.entries.size(); i = next++) {
      fetch_one(manifest.entries[i], dir, cfg, limiter, local, stats_mutex);
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(cfg.parallelism, 1, 16);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (stats) *stats = local;
  return manifest;
}

std::vector<std::string> min_frames_filter(const std::map<std::string, std::size_t>& counts,
                                           std::size_t threshold) {
  std::vector<std::string> out;
  for (const auto& [species, n] : counts) {
    if (n >= threshold) out.push_back(species);
  }
  return out;
}

}  // namespace chorus
