#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "chorus/dsp.hpp"
#include "chorus/error.hpp"
#include "chorus/eval.hpp"
#include "chorus/ingest.hpp"
#include "chorus/knn.hpp"
#include "chorus/pipeline.hpp"
#include "chorus/synth.hpp"
#include "chorus/trainstore.hpp"

namespace chorus::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    lines.push_back(line.substr(first, last - first + 1));
  }
  return lines;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

std::string audio_path_of(const RecordingMeta& m) {
  if (m.wav_path && fs::exists(*m.wav_path)) return *m.wav_path;
  if (m.local_path) return *m.local_path;
  if (m.wav_path) return *m.wav_path;
  throw Error(ErrorKind::Io, "recording " + m.recording_id + " has no local audio");
}

AudioSource source_for(const RecordingMeta& m) {
  const std::string path = audio_path_of(m);
  return {m.species, m.recording_id, [path] { return read_wav_file(path); }};
}

struct ClassifyOptions {
  std::string store_path;
  std::size_t k = 5;
  std::string metric = "l1";
  double tie_bias_m = 2.0;
  std::string classes_file;
  std::size_t jobs = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--store", store_path, "Training store file")->required()->check(CLI::ExistingFile);
    cmd->add_option("-k,--k", k, "Voting neighbours")->capture_default_str();
    cmd->add_option("--metric", metric, "Distance: l1, kl or hellinger")
        ->check(CLI::IsMember({"l1", "kl", "hellinger"}))
        ->capture_default_str();
    cmd->add_option("--tie-bias-m", tie_bias_m, "Tie-bias divisor M (> 1)")->capture_default_str();
    cmd->add_option("--classes", classes_file, "Candidate species, one label per line")
        ->check(CLI::ExistingFile);
    cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  }

  void validate() const {
    if (k < 1) throw UsageError("--k must be at least 1");
    if (!(tie_bias_m > 1.0)) throw UsageError("--tie-bias-m must be greater than 1");
  }

  ClassifierConfig config(const TrainingStore& store) const {
    ClassifierConfig cfg;
    cfg.k = k;
    cfg.metric = parse_metric(metric);
    cfg.tie_bias_m = tie_bias_m;
    if (!classes_file.empty()) {
      std::vector<std::uint32_t> ids;
      for (const auto& label : read_lines(classes_file)) {
        auto id = store.class_id(label);
        if (!id) throw UsageError("candidate species '" + label + "' is not in the store");
        ids.push_back(*id);
      }
      if (ids.empty()) throw UsageError("candidate class file is empty");
      cfg.candidate_classes = std::move(ids);
    }
    return cfg;
  }
};

std::vector<std::size_t> parse_n_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("--n-list entries must be positive integers, got '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--n-list is empty");
  return out;
}

// ---------------------------------------------------------------------------

struct IngestCmd {
  std::string species_file;
  std::string quality = "A";
  std::string background = "none";
  std::string out_path = "manifest.jsonl";
  std::string role = "TRAIN";
  std::string fetch_dir;
  std::string created_at;
  std::string api_url;
  std::string endpoint;
  double rate_limit = 1.0;
  std::size_t jobs = 1;
  bool dry_run = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--species-file", species_file, "Binomial names, one per line")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--quality", quality, "Required quality rating")->capture_default_str();
    cmd->add_option("--background", background, "none: drop recordings listing other species")
        ->check(CLI::IsMember({"none", "any"}))
        ->capture_default_str();
    cmd->add_option("--out", out_path, "Manifest output (JSON Lines)")->capture_default_str();
    cmd->add_option("--role", role, "Manifest role")->check(CLI::IsMember({"TRAIN", "TEST"}))->capture_default_str();
    cmd->add_option("--fetch-dir", fetch_dir, "Also download audio into this directory");
    cmd->add_option("--created-at", created_at, "Timestamp recorded in the manifest (default: now)");
    cmd->add_option("--api-url", api_url, "Archive base URL (overrides CHORUS_ARCHIVE_URL)");
    cmd->add_option("--endpoint", endpoint, "Archive API path");
    cmd->add_option("--rate-limit", rate_limit, "Minimum seconds between requests")->capture_default_str();
    cmd->add_option("--jobs", jobs, "Parallel downloads")->capture_default_str();
    cmd->add_flag("--dry-run", dry_run, "Print the planned queries and exit");
  }

  int run(std::ostream& out, std::ostream& err) const {
    if (rate_limit < 0.0) throw UsageError("--rate-limit must be non-negative");
    QueryTerms terms;
    terms.species = read_lines(species_file);
    if (terms.species.empty()) throw UsageError("species file is empty");
    terms.quality = quality;
    terms.background_none = background == "none";

    ArchiveConfig cfg = ArchiveConfig::from_env();
    if (!api_url.empty()) cfg.base_url = api_url;
    if (!endpoint.empty()) cfg.endpoint = endpoint;
    cfg.min_request_interval_s = rate_limit;
    cfg.parallelism = jobs;

    if (dry_run) {
      for (const auto& url : plan_queries(terms, cfg)) out << "GET " << url << "\n";
      return kExitOk;
    }

    Manifest manifest = query_archive(terms, cfg, created_at.empty() ? utc_now() : created_at,
                                      role == "TRAIN" ? ManifestRole::Train : ManifestRole::Test);
    if (manifest.entries.empty()) err << "warning: no recordings matched the filters\n";
    std::map<std::string, std::size_t> per_species;
    for (const auto& e : manifest.entries) ++per_species[e.species];
    for (const auto& sp : terms.species) out << sp << "\t" << per_species[sp] << " recordings\n";

    if (!fetch_dir.empty()) {
      FetchStats stats;
      manifest = fetch_audio(std::move(manifest), fetch_dir, cfg, &stats);
      out << "downloaded " << stats.downloaded << ", skipped " << stats.skipped << ", failed "
          << stats.failed << "\n";
      for (const auto& e : manifest.entries) {
        if (e.download_error) err << "warning: " << e.recording_id << ": " << *e.download_error << "\n";
      }
      err << "note: convert the downloaded audio to WAV at each entry's wav_path before build-store\n";
    }
    save_manifest_file(manifest, out_path);
    out << "wrote " << out_path << " (" << manifest.entries.size() << " entries)\n";
    return kExitOk;
  }
};

struct BuildStoreCmd {
  std::string manifest_path;
  std::string out_path = "store.chor";
  std::string features = "mode1d";
  std::size_t instance_frames = kDefaultInstanceFrames;
  std::size_t target = 0;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--manifest", manifest_path, "TRAIN manifest with local WAV paths")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out_path, "Store output path")->capture_default_str();
    cmd->add_option("--features", features, "meanstd2d, mode1d, modedelta2d or summary6")
        ->check(CLI::IsMember({"meanstd2d", "mode1d", "modedelta2d", "summary6"}))
        ->capture_default_str();
    cmd->add_option("--instance-frames", instance_frames, "Frames per training instance")->capture_default_str();
    cmd->add_option("--target", target, "Instances per class (0: size of the smallest class)")
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Subsampling seed")->capture_default_str();
    cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  }

  int run(std::ostream& out, std::ostream& err) const {
    if (instance_frames < 1) throw UsageError("--instance-frames must be at least 1");
    const Manifest manifest = load_manifest_file(manifest_path);
    std::vector<AudioSource> sources;
    for (const auto& e : manifest.entries) {
      if (e.download_error) {
        err << "warning: skipping " << e.recording_id << " (" << *e.download_error << ")\n";
        continue;
      }
      sources.push_back(source_for(e));
    }

    BuildOptions opts;
    opts.kind = parse_feature_kind(features);
    opts.instance_frames = instance_frames;
    if (target > 0) opts.target = target;
    opts.seed = seed;
    opts.jobs = jobs;
    BuildSummary summary;
    const TrainingStore store = build_store(sources, opts, &summary);

    out << "species\ttotal_frames\tselected_frames\tinstances\n";
    for (const auto& [species, selected] : summary.selected_frames) {
      auto it = summary.blocks.find(species);
      out << species << "\t" << summary.total_frames[species] << "\t" << selected << "\t"
          << (it == summary.blocks.end() ? std::string("-") : std::to_string(it->second)) << "\n";
    }
    for (const auto& species : summary.excluded) {
      err << "warning: " << species << " has fewer than " << instance_frames
          << " selected frames; excluded\n";
    }
    out << "balance target: " << summary.target << " instances per class, " << store.n_classes()
        << " classes\n";
    save_store_file(store, out_path);
    out << "wrote " << out_path << "\n";
    return kExitOk;
  }
};

struct ClassifyCmd {
  ClassifyOptions opts;
  std::vector<std::string> files;
  std::size_t top = 10;
  double entropy_max = -1.0;
  bool json = false;

  void add_to(CLI::App* cmd) {
    opts.add_to(cmd);
    cmd->add_option("files", files, "WAV files to identify")->required()->check(CLI::ExistingFile);
    cmd->add_option("--top", top, "Labels to print per file")->capture_default_str();
    cmd->add_option("--entropy-max", entropy_max,
                    "Reject when normalized entropy exceeds this value (0..1)");
    cmd->add_flag("--json", json, "Machine-readable output");
  }

  int run(std::ostream& out, std::ostream&) const {
    opts.validate();
    if (top < 1) throw UsageError("--top must be at least 1");
    const bool rejecting = entropy_max >= 0.0;
    if (rejecting && entropy_max > 1.0) throw UsageError("--entropy-max must lie in [0, 1]");

    const TrainingStore store = load_store_file(opts.store_path);
    const ClassifierConfig cfg = opts.config(store);
    std::vector<TestItem> items;
    for (const auto& f : files) items.push_back({0, {"", f, [f] { return read_wav_file(f); }}});
    const auto results = classify_sources(items, store, cfg, opts.jobs);

    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
      const Posterior& post = results[i].posterior;
      const bool rejected = rejecting && rejection_decision(post, entropy_max) == Decision::Reject;
      const std::size_t shown = std::min(top, post.ranking.size());
      if (json) {
        nlohmann::ordered_json ranking = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < shown; ++r) {
          const auto c = post.ranking[r];
          ranking.push_back({{"label", store.labels()[c]}, {"prob", post.prob_of(c)}});
        }
        doc.push_back({{"file", files[i]},
                       {"rejected", rejected},
                       {"entropy", post.entropy},
                       {"normalized_entropy", post.normalized_entropy},
                       {"ranking", ranking}});
        continue;
      }
      out << files[i] << "  normalized entropy " << std::fixed << std::setprecision(3)
          << post.normalized_entropy << (rejected ? "  REJECTED" : "") << "\n";
      if (rejected) continue;
      for (std::size_t r = 0; r < shown; ++r) {
        const auto c = post.ranking[r];
        out << "  " << std::setw(2) << r + 1 << ". " << store.labels()[c] << "  " << std::setprecision(3)
            << post.prob_of(c) << "\n";
      }
      out.unsetf(std::ios::floatfield);
    }
    if (json) out << doc.dump(2) << "\n";
    return kExitOk;
  }
};

struct EvalCmd {
  ClassifyOptions opts;
  std::string manifest_path;
  std::string out_dir = ".";
  std::string n_list = "1,5,10";
  bool sweep = false;

  void add_to(CLI::App* cmd) {
    opts.add_to(cmd);
    cmd->add_option("--manifest", manifest_path, "TEST manifest with labels and local WAV paths")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out-dir", out_dir, "Directory for report files")->capture_default_str();
    cmd->add_option("--n-list", n_list, "Comma-separated N for accuracy@N and MRR@N")->capture_default_str();
  }

  int run(std::ostream& out, std::ostream& err) const {
    opts.validate();
    const auto ns = parse_n_list(n_list);
    const TrainingStore store = load_store_file(opts.store_path);
    const ClassifierConfig cfg = opts.config(store);
    const Manifest manifest = load_manifest_file(manifest_path);

    std::vector<TestItem> items;
    for (const auto& e : manifest.entries) {
      auto id = store.class_id(e.species);
      if (!id) {
        err << "warning: " << e.recording_id << ": species '" << e.species << "' not in store; skipped\n";
        continue;
      }
      items.push_back({*id, source_for(e)});
    }
    if (items.empty()) throw Error(ErrorKind::EmptyInput, "no test recordings with species in the store");
    const auto results = classify_sources(items, store, cfg, opts.jobs);
    const std::size_t n_candidates =
        cfg.candidate_classes ? cfg.candidate_classes->size() : store.n_classes();
    const EvalReport report = evaluate(results, store.labels(), ns, n_candidates);
    for (const auto& w : report.warnings) err << "warning: " << w << "\n";

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    if (sweep) {
      write_text(dir / "sweep.csv", sweep_csv(report));
      write_text(dir / "at_n.csv", at_n_csv(report));
      out << "wrote " << (dir / "sweep.csv").string() << " (" << report.rejection_curve.size()
          << " thresholds) and " << (dir / "at_n.csv").string() << "\n";
      for (const auto& [n, acc] : report.accuracy_at) {
        out << "accuracy@" << n << " " << acc << "  MRR@" << n << " " << report.mrr_at.at(n) << "\n";
      }
    } else {
      write_text(dir / "eval_per_class.csv", per_class_csv(report));
      write_text(dir / "eval_report.json", report_json(report));
      out << "test instances: " << results.size() << "\n";
      out << "accuracy: " << report.accuracy << "\n";
      if (report.auc_roc_summary) {
        const auto& s = *report.auc_roc_summary;
        out << "AUC-ROC weighted mean " << s.weighted_mean << ", median " << s.median << ", IQR "
            << s.iqr << ", range [" << s.min << ", " << s.max << "]\n";
      }
      if (report.auc_pr_summary) {
        out << "AUC-PR weighted mean " << report.auc_pr_summary->weighted_mean << "\n";
      }
      out << "wrote " << (dir / "eval_per_class.csv").string() << " and "
          << (dir / "eval_report.json").string() << "\n";
    }
    return kExitOk;
  }
};

struct SynthCmd {
  std::string out_dir = "fixture";
  std::uint64_t seed = 20160101;
  std::size_t train_per = 20;
  std::size_t test_per = 10;
  double noise_fraction = 0.0;
  std::vector<double> centres{2000.0, 5000.0, 8000.0};

  void add_to(CLI::App* cmd) {
    cmd->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", seed, "Generator seed")->capture_default_str();
    cmd->add_option("--train-per", train_per, "Training clips per species")->capture_default_str();
    cmd->add_option("--test-per", test_per, "Test clips per species")->capture_default_str();
    cmd->add_option("--noise-fraction", noise_fraction, "Extra pure-noise test clips (fraction)")
        ->capture_default_str();
    cmd->add_option("--centres", centres, "Tone centre frequencies in Hz")->capture_default_str();
  }

  int run(std::ostream& out, std::ostream&) const {
    FixtureSpec spec;
    spec.centres_hz = centres;
    spec.seed = seed;
    spec.train_per_species = train_per;
    spec.test_per_species = test_per;
    spec.noise_fraction = noise_fraction;
    const Fixture fx = make_tone_fixture(spec);

    const fs::path dir(out_dir);
    fs::create_directories(dir / "train");
    fs::create_directories(dir / "test");
    auto emit = [&](const std::vector<FixtureClip>& clips, const char* sub, ManifestRole role) {
      Manifest m;
      m.role = role;
      m.created_at = "synthetic";
      m.query_terms.species = fx.species;
      for (const auto& c : clips) {
        const fs::path wav = dir / sub / (c.recording_id + ".wav");
        write_wav_file(wav.string(), c.clip.samples, c.clip.sample_rate);
        RecordingMeta meta;
        meta.recording_id = c.recording_id;
        meta.species = c.species;
        meta.quality = "A";
        meta.duration_s = c.clip.duration_s();
        meta.local_path = wav.string();
        m.entries.push_back(std::move(meta));
      }
      std::sort(m.entries.begin(), m.entries.end(),
                [](const auto& a, const auto& b) { return a.recording_id < b.recording_id; });
      save_manifest_file(m, (dir / (std::string(sub) + ".jsonl")).string());
    };
    emit(fx.train, "train", ManifestRole::Train);
    emit(fx.test, "test", ManifestRole::Test);
    out << "wrote " << fx.train.size() << " training and " << fx.test.size() << " test clips to "
        << dir.string() << "\n";
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"chorus: bird sound identification with histogram kNN"};
  app.name("chorus");
  app.set_config("--config", "", "Key/value configuration file; flags override it");
  app.require_subcommand(1);

  IngestCmd ingest;
  BuildStoreCmd build;
  ClassifyCmd classify;
  EvalCmd eval;
  EvalCmd sweep;
  sweep.sweep = true;
  SynthCmd synth;

  ingest.add_to(app.add_subcommand("ingest", "Query the recording archive into a manifest"));
  build.add_to(app.add_subcommand("build-store", "Build a training store from a TRAIN manifest"));
  classify.add_to(app.add_subcommand("classify", "Rank candidate species for WAV files"));
  eval.add_to(app.add_subcommand("eval", "Per-class AUC report over a TEST manifest"));
  sweep.add_to(app.add_subcommand("sweep", "Rejection curve and accuracy@N / MRR@N tables"));
  synth.add_to(app.add_subcommand("synth", "Write the synthetic tone fixture dataset"));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    if (!app.get_subcommands().empty()) {
      err << app.get_subcommands().front()->help();
    } else {
      err << app.help();
    }
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  err << "# resolved configuration\n[" << name << "]\n" << sub->config_to_str(true, false);
  try {
    if (name == "ingest") return ingest.run(out, err);
    if (name == "build-store") return build.run(out, err);
    if (name == "classify") return classify.run(out, err);
    if (name == "eval") return eval.run(out, err);
    if (name == "sweep") return sweep.run(out, err);
    if (name == "synth") return synth.run(out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace chorus::cli
