#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chorus {

struct RecordingMeta {
  std::string recording_id;
  std::string species;  // binomial name
  std::string quality;
  std::vector<std::string> background_species;
  double duration_s = 0.0;
  std::string audio_url;
  std::optional<std::string> local_path;
  std::optional<std::string> wav_path;  // expected output of the external conversion step
  std::optional<std::string> sha256;
  std::optional<std::string> download_error;

  bool operator==(const RecordingMeta&) const = default;
};

enum class ManifestRole { Train, Test };

struct QueryTerms {
  std::vector<std::string> species;
  std::string quality = "A";
  bool background_none = true;
  std::string endpoint;

  bool admits(const RecordingMeta& meta) const;
  bool operator==(const QueryTerms&) const = default;
};

struct Manifest {
  ManifestRole role = ManifestRole::Train;
  std::string created_at;
  QueryTerms query_terms;
  std::vector<RecordingMeta> entries;

  bool operator==(const Manifest&) const = default;
};

/// JSON Lines: a header object on the first line, then one recording per
/// line in recording_id order. Keys are written in a fixed order.
std::string write_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text);
void save_manifest_file(const Manifest& manifest, const std::string& path);
Manifest load_manifest_file(const std::string& path);

/// Names of the response fields; the archive's schema moves between API
/// versions so none of them are hard-wired.
struct ArchiveFields {
  std::string recordings = "recordings";
  std::string num_pages = "numPages";
  std::string id = "id";
  std::string genus = "gen";
  std::string species = "sp";
  std::string quality = "q";
  std::string background = "also";
  std::string length = "length";
  std::string file = "file";
};

struct ArchiveConfig {
  std::string base_url = "https://xeno-canto.org";
  std::string endpoint = "/api/3/recordings";
  std::string api_key;
  ArchiveFields fields;
  double min_request_interval_s = 1.0;
  std::size_t parallelism = 1;
  std::chrono::seconds timeout{30};

  /// Defaults overridden by CHORUS_ARCHIVE_URL and XC_API_KEY when set.
  static ArchiveConfig from_env();
};

/// Minimum spacing between requests, shared across worker threads.
class RateLimiter {
 public:
  explicit RateLimiter(double min_interval_s) : interval_(min_interval_s) {}
  void wait();

 private:
  std::mutex mutex_;
  double interval_;
  std::optional<std::chrono::steady_clock::time_point> last_;
};

/// First-page request URLs for each species, for --dry-run.
std::vector<std::string> plan_queries(const QueryTerms& terms, const ArchiveConfig& cfg);

/// Parses one page of the archive response, keeping entries that satisfy
/// `terms`. Sets `num_pages`.
std::vector<RecordingMeta> parse_archive_page(std::string_view body, const ArchiveConfig& cfg,
                                              const QueryTerms& terms, std::size_t& num_pages);

/// Queries every page for every species and returns the filtered,
/// deduplicated and id-ordered manifest. An empty manifest is valid.
Manifest query_archive(const QueryTerms& terms, const ArchiveConfig& cfg, std::string created_at,
                       ManifestRole role = ManifestRole::Train);

struct FetchStats {
  std::size_t downloaded = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

/// Downloads each entry to dest_dir/<id>.<ext> with a .sha256 sidecar.
/// Files whose sidecar matches are not fetched again. Failures are recorded
/// on the entry and do not stop the run.
Manifest fetch_audio(Manifest manifest, const std::string& dest_dir, const ArchiveConfig& cfg,
                     FetchStats* stats = nullptr);

std::string sha256_file(const std::string& path);

/// Species whose selected-frame count reaches `threshold`, sorted.
std::vector<std::string> min_frames_filter(const std::map<std::string, std::size_t>& counts,
                                           std::size_t threshold);

double parse_duration(std::string_view text);

}  // namespace chorus
