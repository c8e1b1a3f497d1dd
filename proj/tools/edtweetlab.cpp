#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "edtweetlab/pipeline.hpp"

namespace etl = edtweetlab;
namespace fs = std::filesystem;

namespace {

std::optional<std::uint64_t> seed_from_env() {
  const char* env = std::getenv("EDTWEETLAB_SEED");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0') {
    throw etl::ConfigError("EDTWEETLAB_SEED must be an unsigned integer");
  }
  return static_cast<std::uint64_t>(v);
}

// env > flag > config default
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const etl::Config& config) {
  if (auto env = seed_from_env()) return *env;
  if (flag) return *flag;
  return config.get_u64("run.seed");
}

etl::Config load_config_or_defaults(const std::string& path) {
  return path.empty() ? etl::Config::defaults() : etl::Config::load(path);
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
  } else {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    etl::write_file_atomic(p, content);
    std::cout << "wrote " << path << "\n";
  }
}

std::vector<etl::LabeledTweet> load_labeled(const std::string& data_path,
                                            const std::string& labels_path) {
  auto clean = etl::load_clean_tsv(data_path);
  etl::JoinResult join = etl::join_labels(clean, etl::load_labels(labels_path));
  if (join.unlabeled > 0) {
    std::cout << join.unlabeled << " tweets without labels were dropped\n";
  }
  return std::move(join.data);
}

void print_counts(const std::string& stage, const std::map<std::string, std::uint64_t>& counts) {
  std::cout << stage << ":";
  for (const auto& [key, value] : counts) std::cout << " " << key << "=" << value;
  std::cout << "\n";
}

struct CliArgs {
  // ingest
  std::vector<std::string> set1, set2, set3;
  bool require_keyword = false;
  std::string ingest_out = "corpus.tsv";
  // preprocess
  std::vector<std::string> pre_in;
  std::string stopwords;
  double sim_threshold = 0.8;
  std::string pre_out = "clean.tsv";
  std::string removed_log;
  // stats
  std::string stats_in, stats_labels, stats_out;
  std::uint64_t top_k = 10;
  std::string stats_format = "md";
  // train
  std::string model_kind, data_path, labels_path, config_path, train_out = "model.bin";
  int category = 1;
  std::optional<std::uint64_t> seed_flag;
  std::size_t jobs = 1;
  // evaluate
  std::string models_csv, categories_csv;
  std::optional<std::uint64_t> runs_flag, folds_flag;
  std::optional<double> test_fraction_flag;
  bool stratify = false, vary_split = false;
  std::string report_md, report_csv;
  // report
  std::string report_in, report_out;
  // run
  std::string run_config, from_manifest;
};

int dispatch(CLI::App& app, CliArgs& a) {
  if (app.got_subcommand("schema")) {
    std::cout << etl::version_and_schema_text();
    return 0;
  }

  if (app.got_subcommand("ingest")) {
    std::vector<std::pair<fs::path, int>> archives;
    for (const auto& p : a.set1) archives.emplace_back(p, 1);
    for (const auto& p : a.set2) archives.emplace_back(p, 2);
    for (const auto& p : a.set3) archives.emplace_back(p, 3);
    if (archives.empty()) throw etl::ConfigError("ingest: no input archives given");
    etl::IngestOutcome out = etl::ingest_archives(archives, a.require_keyword);
    write_or_print(a.ingest_out, etl::corpus_to_tsv(out.corpus));
    print_counts("ingest", out.counts);
    return 0;
  }

  if (app.got_subcommand("preprocess")) {
    if (a.pre_in.empty()) throw etl::ConfigError("preprocess: no input files given");
    std::vector<etl::Corpus> parts;
    for (const auto& p : a.pre_in) parts.push_back(etl::load_archive_file(p, 0).corpus);
    etl::Corpus merged = etl::merge_and_dedup(parts);
    auto stop = etl::load_stopwords(a.stopwords);
    if (a.sim_threshold < 0.0 || a.sim_threshold > 1.0) {
      throw etl::ConfigError("--sim-threshold must lie in [0, 1]");
    }
    etl::PreprocessOutcome out = etl::preprocess_corpus(merged, stop, a.sim_threshold);
    write_or_print(a.pre_out, etl::clean_to_tsv(out.clean));
    if (!a.removed_log.empty()) {
      write_or_print(a.removed_log, etl::removals_to_csv(out.removed));
    }
    print_counts("preprocess", out.counts);
    return 0;
  }

  if (app.got_subcommand("stats")) {
    auto clean = etl::load_clean_tsv(a.stats_in);
    auto terms = etl::term_frequencies(clean, a.top_k);
    bool have_dist = false;
    std::array<etl::CategoryDistribution, etl::kNumCategories> dist{};
    if (!a.stats_labels.empty()) {
      etl::JoinResult join = etl::join_labels(clean, etl::load_labels(a.stats_labels));
      if (!join.data.empty()) {
        dist = etl::label_distribution(join.data);
        have_dist = true;
      }
    }
    if (a.stats_format == "csv") {
      std::string out = etl::term_frequencies_csv(terms);
      if (have_dist) out += "\n" + etl::label_distribution_csv(dist);
      write_or_print(a.stats_out, out);
    } else {
      write_or_print(a.stats_out,
                     etl::stats_markdown(terms, have_dist ? &dist : nullptr, clean.size()));
    }
    return 0;
  }

  if (app.got_subcommand("train")) {
    etl::Config config = load_config_or_defaults(a.config_path);
    etl::ModelSettings settings = etl::settings_from_config(config);
    std::uint64_t seed = resolve_seed(a.seed_flag, config);
    auto data = load_labeled(a.data_path, a.labels_path);
    etl::TrainedModel model =
        etl::train_model(a.model_kind, a.category, data, settings, seed, a.jobs);
    fs::path out(a.train_out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    etl::save_checkpoint(out, etl::to_checkpoint(model));
    std::cout << "trained " << a.model_kind << " category " << a.category << " on "
              << data.size() << " tweets in " << etl::format_fixed(model.train_wall_clock_s, 3)
              << " s\nwrote " << a.train_out << "\n";
    return 0;
  }

  if (app.got_subcommand("evaluate")) {
    etl::Config config = load_config_or_defaults(a.config_path);
    if (!a.models_csv.empty()) config.set("eval.models", a.models_csv);
    if (!a.categories_csv.empty()) config.set("eval.categories", a.categories_csv);
    if (a.runs_flag) config.set("eval.runs", std::to_string(*a.runs_flag));
    if (a.folds_flag) config.set("eval.folds", std::to_string(*a.folds_flag));
    if (a.test_fraction_flag) {
      config.set("eval.test_fraction", etl::format_fixed(*a.test_fraction_flag, 6));
    }
    if (a.stratify) config.set("eval.stratify", "true");
    if (a.vary_split) config.set("eval.vary_split", "true");
    std::uint64_t seed = resolve_seed(a.seed_flag, config);
    etl::ModelSettings settings = etl::settings_from_config(config);
    etl::EvaluateOptions opt = etl::evaluate_options_from_config(config, seed, a.jobs);
    auto data = load_labeled(a.data_path, a.labels_path);
    etl::EvalReport report = etl::evaluate_models(data, settings, opt);
    report.config_text = config.snapshot();
    if (!a.report_csv.empty()) {
      write_or_print(a.report_csv, etl::emit_report(report, etl::ReportFormat::kCsv));
    }
    if (!a.report_md.empty()) {
      write_or_print(a.report_md, etl::emit_report(report, etl::ReportFormat::kMarkdown));
    }
    if (a.report_csv.empty() && a.report_md.empty()) {
      std::cout << etl::emit_report(report, etl::ReportFormat::kMarkdown);
    }
    return 0;
  }

  if (app.got_subcommand("report")) {
    etl::EvalReport report = etl::parse_report_csv(etl::read_file(a.report_in));
    write_or_print(a.report_out, etl::emit_report(report, etl::ReportFormat::kMarkdown));
    return 0;
  }

  if (app.got_subcommand("run")) {
    if (!a.from_manifest.empty()) {
      etl::run_from_manifest(a.from_manifest, a.jobs, &std::cout);
      return 0;
    }
    if (a.run_config.empty()) {
      throw etl::ConfigError("run: --config or --from-manifest is required");
    }
    etl::Config config = etl::Config::load(a.run_config);
    std::optional<std::uint64_t> seed;
    if (auto env = seed_from_env()) {
      seed = env;
    } else if (a.seed_flag) {
      seed = a.seed_flag;
    }
    etl::RunManifest manifest = etl::run_pipeline(config, a.jobs, seed, &std::cout);
    std::cout << "done, " << manifest.outputs.size() << " artifacts under "
              << config.get_path("run.out_dir").string() << "\n";
    return 0;
  }

  std::cout << app.help();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eating-disorder tweet classification pipeline"};
  app.set_version_flag("--version", std::string("edtweetlab ") + etl::kVersion);
  app.require_subcommand(0, 1);
  CliArgs a;

  CLI::App* ingest = app.add_subcommand("ingest", "parse raw archives into one merged corpus");
  ingest->add_option("--set1", a.set1, "archives collected with the first keyword set");
  ingest->add_option("--set2", a.set2, "archives collected with the second keyword set");
  ingest->add_option("--set3", a.set3, "archives collected with the third keyword set");
  ingest->add_flag("--require-keyword", a.require_keyword,
                   "drop records that match no collection keyword");
  ingest->add_option("--out", a.ingest_out, "output corpus TSV (default corpus.tsv)");

  CLI::App* pre = app.add_subcommand("preprocess", "clean, tokenize and near-dup filter a corpus");
  pre->add_option("--in", a.pre_in, "corpus TSV file(s)")->required();
  pre->add_option("--stopwords", a.stopwords, "stop-word list, one token per line")->required();
  pre->add_option("--sim-threshold", a.sim_threshold,
                  "similarity above which the later tweet is dropped (default 0.8)");
  pre->add_option("--out", a.pre_out, "output clean TSV (default clean.tsv)");
  pre->add_option("--removed-log", a.removed_log, "CSV log of removed near-duplicates");

  CLI::App* stats = app.add_subcommand("stats", "corpus term and label statistics");
  stats->add_option("--in", a.stats_in, "clean TSV")->required();
  stats->add_option("--labels", a.stats_labels, "label CSV (id,cat1..cat4)");
  stats->add_option("--top-k", a.top_k, "number of most frequent terms (default 10)");
  stats->add_option("--format", a.stats_format, "md or csv (default md)")
      ->check(CLI::IsMember({"md", "csv"}));
  stats->add_option("--out", a.stats_out, "output file (default stdout)");

  CLI::App* train = app.add_subcommand("train", "train one classifier and save a checkpoint");
  train->add_option("--model", a.model_kind, "forest, rnn, bilstm or transformer")
      ->required()
      ->check(CLI::IsMember({"forest", "rnn", "bilstm", "transformer"}));
  train->add_option("--category", a.category, "label category, 1..4")
      ->required()
      ->check(CLI::Range(1, 4));
  train->add_option("--data", a.data_path, "clean TSV")->required();
  train->add_option("--labels", a.labels_path, "label CSV")->required();
  train->add_option("--config", a.config_path, "config file (defaults apply when omitted)");
  train->add_option("--seed", a.seed_flag, "master seed override");
  train->add_option("--out", a.train_out, "checkpoint path (default model.bin)");
  train->add_option("--jobs", a.jobs, "worker threads for forest training (default 1)");

  CLI::App* eval = app.add_subcommand("evaluate", "cross-validated model comparison");
  eval->add_option("--data", a.data_path, "clean TSV")->required();
  eval->add_option("--labels", a.labels_path, "label CSV")->required();
  eval->add_option("--config", a.config_path, "config file (defaults apply when omitted)");
  eval->add_option("--models", a.models_csv, "comma list, e.g. forest,rnn");
  eval->add_option("--categories", a.categories_csv, "comma list, e.g. 1,2");
  eval->add_option("--seed", a.seed_flag, "master seed override");
  eval->add_option("--runs", a.runs_flag, "repeated runs per network cell");
  eval->add_option("--folds", a.folds_flag, "cross-validation folds for the forest");
  eval->add_option("--test-fraction", a.test_fraction_flag, "held-out fraction for networks");
  eval->add_flag("--stratify", a.stratify, "stratify the train/test split");
  eval->add_flag("--vary-split", a.vary_split, "redraw the split for every repeated run");
  eval->add_option("--report", a.report_md, "write the markdown report here");
  eval->add_option("--report-csv", a.report_csv, "write the CSV report here");
  eval->add_option("--jobs", a.jobs, "worker threads for forest training (default 1)");

  CLI::App* report = app.add_subcommand("report", "render a CSV report as markdown");
  report->add_option("--in", a.report_in, "report CSV")->required();
  report->add_option("--out", a.report_out, "output markdown (default stdout)");

  CLI::App* run = app.add_subcommand("run", "execute the full pipeline from a config file");
  run->add_option("--config", a.run_config, "config file");
  run->add_option("--from-manifest", a.from_manifest, "re-execute a recorded manifest");
  run->add_option("--seed", a.seed_flag, "master seed override");
  run->add_option("--jobs", a.jobs, "worker threads for forest training (default 1)");

  app.add_subcommand("schema", "print the tool version and every config key with its default");

  CLI11_PARSE(app, argc, argv);

  try {
    return dispatch(app, a);
  } catch (const etl::FileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const etl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const etl::TrainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
