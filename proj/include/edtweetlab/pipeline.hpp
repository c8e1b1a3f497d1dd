#ifndef EDTWEETLAB_PIPELINE_HPP_
#define EDTWEETLAB_PIPELINE_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "edtweetlab/config.hpp"
#include "edtweetlab/corpus.hpp"
#include "edtweetlab/eval.hpp"
#include "edtweetlab/features.hpp"
#include "edtweetlab/models.hpp"
#include "edtweetlab/textprep.hpp"
#include "edtweetlab/util.hpp"
#include "edtweetlab/version.hpp"

namespace edtweetlab {

// --- config -> runtime settings -------------------------------------------

inline ModelSettings settings_from_config(const Config& c) {
  ModelSettings s;
  try {
    for (int cat = 1; cat <= kNumCategories; ++cat) {
      std::string p = "forest.cat" + std::to_string(cat) + ".";
      ForestConfig& f = s.forest[cat - 1];
      f.max_depth = c.get_u64(p + "max_depth");
      f.max_features = parse_max_features(c.get_string(p + "max_features"));
      f.n_estimators = c.get_u64(p + "n_estimators");
      f.validate();
    }
    for (RecurrentConfig* r : {&s.rnn, &s.bilstm}) {
      std::string p = r == &s.rnn ? "rnn." : "bilstm.";
      r->embed_dim = c.get_u64(p + "embed_dim");
      r->hidden_dim = c.get_u64(p + "hidden_dim");
      r->max_len = c.get_u64(p + "max_len");
      r->lr = c.get_double(p + "lr");
      r->batch_size = c.get_u64(p + "batch_size");
      r->epochs = c.get_u64(p + "epochs");
      r->bidirectional = r == &s.bilstm;
      r->validate();
    }
    s.transformer.n_layers = c.get_u64("transformer.n_layers");
    s.transformer.n_heads = c.get_u64("transformer.n_heads");
    s.transformer.d_model = c.get_u64("transformer.d_model");
    s.transformer.ff_dim = c.get_u64("transformer.ff_dim");
    s.transformer.max_len = c.get_u64("transformer.max_len");
    s.transformer.lr = c.get_double("transformer.lr");
    s.transformer.batch_size = c.get_u64("transformer.batch_size");
    s.transformer.epochs = c.get_u64("transformer.epochs");
    s.transformer.reference_protocol = c.get_bool("transformer.reference_protocol");
    s.transformer.validate();
    s.vocab_min_df = c.get_u64("features.min_df");
    if (s.vocab_min_df == 0) throw InvalidArgument("features.min_df must be at least 1");
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline EvaluateOptions evaluate_options_from_config(const Config& c, std::uint64_t seed,
                                                    std::size_t jobs) {
  EvaluateOptions opt;
  opt.models = c.get_list("eval.models");
  for (const std::string& m : opt.models) {
    if (!is_known_model_kind(m)) throw ConfigError("eval.models: unknown model kind '" + m + "'");
  }
  opt.categories = c.get_int_list("eval.categories");
  for (int cat : opt.categories) {
    if (cat < 1 || cat > kNumCategories) {
      throw ConfigError("eval.categories: values must lie in 1..4");
    }
  }
  opt.folds = c.get_u64("eval.folds");
  opt.runs = c.get_u64("eval.runs");
  opt.test_fraction = c.get_double("eval.test_fraction");
  if (!(opt.test_fraction > 0.0 && opt.test_fraction < 1.0)) {
    throw ConfigError("eval.test_fraction must lie in (0, 1)");
  }
  if (opt.folds < 2) throw ConfigError("eval.folds must be at least 2");
  if (opt.runs == 0) throw ConfigError("eval.runs must be at least 1");
  opt.stratify = c.get_bool("eval.stratify");
  opt.vary_split = c.get_bool("eval.vary_split");
  opt.seed = seed;
  opt.jobs = jobs;
  return opt;
}

// --- stage helpers ---------------------------------------------------------

struct IngestOutcome {
  Corpus corpus;  // merged, retweets and exact duplicates removed
  std::map<std::string, std::uint64_t> counts;
};

// Parses the given archives (path, keyword-set index), applies the record
// filters and merges everything into one corpus. Input files are hashed into
// `input_hashes` when a map is supplied.
inline IngestOutcome ingest_archives(
    const std::vector<std::pair<std::filesystem::path, int>>& archives, bool require_keyword,
    std::map<std::string, std::string>* input_hashes = nullptr) {
  if (archives.empty()) throw ConfigError("no input archives configured");
  IngestOutcome out;
  std::vector<Corpus> parts;
  std::uint64_t lines = 0, malformed = 0, keyword_dropped = 0;
  KeywordSets keywords = KeywordSets::defaults();
  for (const auto& [path, set] : archives) {
    std::string content;
    try {
      content = read_file(path);
    } catch (const FileError&) {
      throw FileError("input archive not found: " + path.string());
    }
    if (input_hashes) {
      (*input_hashes)[std::filesystem::absolute(path).string()] =
          hash_file_hex(path);
    }
    std::istringstream stream(content);
    ParseResult parsed = parse_archive(stream, set, path.filename().string());
    lines += parsed.lines;
    malformed += parsed.malformed;
    if (require_keyword) {
      Corpus filtered;
      filtered.provenance = parsed.corpus.provenance;
      for (RawTweet& t : parsed.corpus.tweets) {
        if (keyword_match(t.text, keywords).empty()) {
          ++keyword_dropped;
        } else {
          filtered.tweets.push_back(std::move(t));
        }
      }
      parts.push_back(std::move(filtered));
    } else {
      parts.push_back(std::move(parsed.corpus));
    }
  }
  CorpusStats stats = corpus_stats(parts);
  out.corpus = merge_and_dedup(parts);
  out.counts["files"] = archives.size();
  out.counts["lines"] = lines;
  out.counts["malformed"] = malformed;
  if (require_keyword) out.counts["keyword_dropped"] = keyword_dropped;
  out.counts["raw"] = stats.raw;
  out.counts["after_retweets"] = stats.after_retweets;
  out.counts["after_dedup"] = stats.after_dedup;
  return out;
}

struct PreprocessOutcome {
  std::vector<CleanTweet> clean;  // tokenized, near-dup filtered, stop words removed
  std::vector<DedupResult::Removal> removed;
  std::map<std::string, std::uint64_t> counts;
};

// Language filter, tokenizer, near-duplicate removal (on pre-stop-word
// normalized text) and stop-word removal, in that order.
inline PreprocessOutcome preprocess_corpus(const Corpus& corpus,
                                           const std::vector<std::string>& stopwords,
                                           double sim_threshold) {
  PreprocessOutcome out;
  Corpus english = filter_language(corpus, stopwords);
  out.counts["after_language"] = english.size();
  std::vector<CleanTweet> interim;
  interim.reserve(english.size());
  for (const RawTweet& t : english.tweets) {
    interim.push_back(make_clean_tweet(t.id, tokenize(t.text)));
  }
  DedupConfig dedup_config;
  dedup_config.threshold = sim_threshold;
  DedupResult dedup = dedup_by_similarity(interim, dedup_config);
  out.removed = std::move(dedup.removed);
  out.counts["after_similarity"] = dedup.kept.size();
  out.counts["removed_pairs"] = out.removed.size();
  out.clean.reserve(dedup.kept.size());
  for (const CleanTweet& t : dedup.kept) {
    out.clean.push_back(make_clean_tweet(t.id, remove_stopwords(t.tokens, stopwords)));
  }
  return out;
}

// --- stats rendering -------------------------------------------------------

inline std::string term_frequencies_csv(
    const std::vector<std::pair<std::string, std::uint64_t>>& terms) {
  std::string out = "term,count\n";
  for (const auto& [term, count] : terms) {
    out += term;
    out += ',';
    out += std::to_string(count);
    out += '\n';
  }
  return out;
}

inline std::string label_distribution_csv(
    const std::array<CategoryDistribution, kNumCategories>& dist) {
  std::string out = "category,positives,negatives,positive_pct\n";
  for (int c = 0; c < kNumCategories; ++c) {
    out += std::to_string(c + 1);
    out += ',';
    out += std::to_string(dist[c].positives);
    out += ',';
    out += std::to_string(dist[c].negatives);
    out += ',';
    out += format_fixed(100.0 * dist[c].fraction, 1);
    out += '\n';
  }
  return out;
}

inline std::string stats_markdown(
    const std::vector<std::pair<std::string, std::uint64_t>>& terms,
    const std::array<CategoryDistribution, kNumCategories>* dist, std::size_t corpus_size) {
  std::string out = "# Corpus statistics\n\n";
  out += "- tweets: " + std::to_string(corpus_size) + "\n\n";
  out += "## Most frequent terms\n\n| rank | term | count |\n|---|---|---|\n";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    out += "| " + std::to_string(i + 1) + " | " + terms[i].first + " | " +
           std::to_string(terms[i].second) + " |\n";
  }
  if (dist) {
    out += "\n## Label distribution\n\n| category | positives | negatives | positive % |\n";
    out += "|---|---|---|---|\n";
    for (int c = 0; c < kNumCategories; ++c) {
      out += "| " + std::to_string(c + 1) + " | " + std::to_string((*dist)[c].positives) +
             " | " + std::to_string((*dist)[c].negatives) + " | " +
             format_fixed(100.0 * (*dist)[c].fraction, 1) + " |\n";
    }
  }
  return out;
}

// --- manifest ----------------------------------------------------------------

struct RunManifest {
  std::string tool_version = kVersion;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string config_snapshot;
  std::map<std::string, std::string> input_hashes;
  std::map<std::string, std::map<std::string, std::uint64_t>> stage_counts;
  std::vector<std::string> outputs;  // paths relative to the output directory
};

inline std::string manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed;
  j["jobs"] = m.jobs;
  j["config"] = m.config_snapshot;
  j["input_hashes"] = m.input_hashes;
  j["stage_counts"] = m.stage_counts;
  j["outputs"] = m.outputs;
  return j.dump(2) + "\n";
}

inline RunManifest manifest_from_json(const std::string& text) {
  RunManifest m;
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.jobs = j.at("jobs").get<std::size_t>();
    m.config_snapshot = j.at("config").get<std::string>();
    m.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
    m.stage_counts =
        j.at("stage_counts").get<std::map<std::string, std::map<std::string, std::uint64_t>>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

// --- full pipeline ---------------------------------------------------------

// Runs ingest -> preprocess -> stats -> train -> evaluate -> report under one
// master seed and writes every artifact plus manifest.json into run.out_dir.
// The train/evaluate/report stages require labels.file and are skipped (and
// marked so in the manifest) when it is not set.
inline RunManifest run_pipeline(const Config& config, std::size_t jobs,
                                std::optional<std::uint64_t> seed_override = std::nullopt,
                                std::ostream* log = nullptr) {
  RunManifest manifest;
  manifest.seed = seed_override ? *seed_override : config.get_u64("run.seed");
  manifest.jobs = jobs = std::max<std::size_t>(1, jobs);
  manifest.config_snapshot = config.snapshot();
  auto note = [&](const std::string& line) {
    if (log) *log << line << "\n";
  };

  std::filesystem::path out_dir = config.get_path("run.out_dir");
  if (out_dir.empty()) throw ConfigError("run.out_dir must not be empty");
  std::filesystem::create_directories(out_dir);
  auto emit = [&](const std::string& rel, const std::string& content) {
    std::filesystem::path p = out_dir / rel;
    std::filesystem::create_directories(p.parent_path());
    write_file_atomic(p, content);
    manifest.outputs.push_back(rel);
  };
  // listed in outputs before serialization so the file describes itself
  auto emit_manifest = [&] {
    manifest.outputs.push_back("manifest.json");
    write_file_atomic(out_dir / "manifest.json", manifest_to_json(manifest));
  };

  // ingest
  std::vector<std::pair<std::filesystem::path, int>> archives;
  for (int set = 1; set <= 3; ++set) {
    for (const auto& p : config.get_path_list("ingest.set" + std::to_string(set))) {
      archives.emplace_back(p, set);
    }
  }
  IngestOutcome ingest = ingest_archives(archives, config.get_bool("ingest.require_keyword"),
                                         &manifest.input_hashes);
  manifest.stage_counts["ingest"] = ingest.counts;
  emit("corpus.tsv", corpus_to_tsv(ingest.corpus));
  note("ingest: " + std::to_string(ingest.corpus.size()) + " tweets after merge");

  // preprocess
  std::filesystem::path stopword_path = config.get_path("preprocess.stopwords");
  if (stopword_path.empty()) throw ConfigError("preprocess.stopwords must be set");
  if (!std::filesystem::exists(stopword_path)) {
    throw FileError("stop-word file not found: " + stopword_path.string());
  }
  manifest.input_hashes[std::filesystem::absolute(stopword_path).string()] =
      hash_file_hex(stopword_path);
  std::vector<std::string> stopwords = load_stopwords(stopword_path);
  double threshold = config.get_double("preprocess.sim_threshold");
  if (threshold < 0.0 || threshold > 1.0) {
    throw ConfigError("preprocess.sim_threshold must lie in [0, 1]");
  }
  PreprocessOutcome pre = preprocess_corpus(ingest.corpus, stopwords, threshold);
  manifest.stage_counts["preprocess"] = pre.counts;
  emit("clean.tsv", clean_to_tsv(pre.clean));
  emit("removed.csv", removals_to_csv(pre.removed));
  note("preprocess: " + std::to_string(pre.clean.size()) + " tweets after near-dup filter");

  // stats
  std::size_t top_k = config.get_u64("stats.top_k");
  auto terms = term_frequencies(pre.clean, top_k);
  emit("term_frequencies.csv", term_frequencies_csv(terms));
  std::map<std::string, std::uint64_t> stats_counts;
  stats_counts["tweets"] = pre.clean.size();
  stats_counts["distinct_terms_listed"] = terms.size();

  std::vector<LabeledTweet> labeled;
  std::filesystem::path labels_path = config.get_path("labels.file");
  bool have_labels = !labels_path.empty();
  std::array<CategoryDistribution, kNumCategories> dist{};
  if (have_labels) {
    if (!std::filesystem::exists(labels_path)) {
      throw FileError("label file not found: " + labels_path.string());
    }
    manifest.input_hashes[std::filesystem::absolute(labels_path).string()] =
        hash_file_hex(labels_path);
    JoinResult join = join_labels(pre.clean, load_labels(labels_path));
    labeled = std::move(join.data);
    stats_counts["labeled"] = labeled.size();
    stats_counts["unlabeled"] = join.unlabeled;
    if (!labeled.empty()) {
      dist = label_distribution(labeled);
      emit("label_distribution.csv", label_distribution_csv(dist));
    }
  }
  emit("stats.md", stats_markdown(terms, have_labels && !labeled.empty() ? &dist : nullptr,
                                  pre.clean.size()));
  manifest.stage_counts["stats"] = stats_counts;

  if (!have_labels) {
    manifest.stage_counts["train"]["skipped"] = 1;
    manifest.stage_counts["evaluate"]["skipped"] = 1;
    note("train/evaluate: skipped (no labels.file)");
    emit_manifest();
    return manifest;
  }
  if (labeled.size() < 4) throw TrainError("too few labeled tweets to train");

  ModelSettings settings = settings_from_config(config);
  EvaluateOptions opt = evaluate_options_from_config(config, manifest.seed, jobs);

  // train on the full labeled set, one checkpoint per (model, category)
  std::map<std::string, std::uint64_t> train_counts;
  for (const std::string& kind : opt.models) {
    for (int category : opt.categories) {
      std::uint64_t seed =
          derive_seed(manifest.seed, "train/" + kind + "/cat" + std::to_string(category));
      TrainedModel model = train_model(kind, category, labeled, settings, seed, jobs);
      std::string rel = "models/" + kind + "_cat" + std::to_string(category) + ".bin";
      emit(rel, serialize_checkpoint(to_checkpoint(model)));
      ++train_counts["models_trained"];
      note("train: " + rel);
    }
  }
  manifest.stage_counts["train"] = train_counts;

  // evaluate + report
  EvalReport report = evaluate_models(labeled, settings, opt);
  report.dataset_hash = [&] {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(clean_to_tsv(pre.clean))));
    return std::string(buf);
  }();
  report.config_text = manifest.config_snapshot;
  emit("report.csv", emit_report(report, ReportFormat::kCsv));
  emit("report.md", emit_report(report, ReportFormat::kMarkdown));
  manifest.stage_counts["evaluate"]["cells"] = report.cells.size();
  note("evaluate: " + std::to_string(report.cells.size()) + " report cells");

  emit_manifest();
  return manifest;
}

// Re-executes a pipeline from its manifest: the recorded config snapshot is
// replayed after verifying that every recorded input hash still matches.
inline RunManifest run_from_manifest(const std::filesystem::path& manifest_path,
                                     std::size_t jobs, std::ostream* log = nullptr) {
  RunManifest recorded = manifest_from_json(read_file(manifest_path));
  for (const auto& [path, hash] : recorded.input_hashes) {
    if (!std::filesystem::exists(path)) throw FileError("manifest input missing: " + path);
    if (hash_file_hex(path) != hash) {
      throw FormatError("manifest input changed on disk: " + path);
    }
  }
  Config config = Config::from_text(recorded.config_snapshot,
                                    std::filesystem::current_path(), manifest_path.string());
  return run_pipeline(config, jobs, recorded.seed, log);
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_PIPELINE_HPP_
