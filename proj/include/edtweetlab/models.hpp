#ifndef EDTWEETLAB_MODELS_HPP_
#define EDTWEETLAB_MODELS_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edtweetlab/checkpoint.hpp"
#include "edtweetlab/eval.hpp"
#include "edtweetlab/features.hpp"
#include "edtweetlab/forest.hpp"
#include "edtweetlab/neural.hpp"
#include "edtweetlab/util.hpp"
#include "edtweetlab/version.hpp"

namespace edtweetlab {

// A classifier for one category, bundled with the featurization state needed
// to score raw cleaned tweets.
struct TrainedModel {
  std::string kind;  // forest | rnn | bilstm | transformer
  int category = 0;
  double train_wall_clock_s = 0.0;
  Vocabulary vocab;
  std::optional<RandomForest> forest;
  std::optional<NeuralModel> neural;
};

inline bool is_known_model_kind(const std::string& kind) {
  return model_rank(kind) < static_cast<int>(model_order().size());
}

// --- prediction ----------------------------------------------------------

inline std::vector<double> predict_probabilities(const TrainedModel& model,
                                                 const std::vector<CleanTweet>& tweets) {
  if (model.kind == "forest") {
    if (!model.forest) throw InvalidArgument("model has no forest payload");
    FeatureMatrix x = tfidf(tweets, model.vocab);
    std::vector<double> probs(x.n_rows());
    for (std::size_t r = 0; r < x.n_rows(); ++r) probs[r] = model.forest->predict_prob(x, r);
    return probs;
  }
  if (!model.neural) throw InvalidArgument("model has no network payload");
  bool with_cls = model.neural->arch == Arch::kTransformer;
  auto seqs = encode_sequences(tweets, model.vocab, model.neural->max_len, with_cls);
  return predict_probs(*model.neural, seqs);
}

// Hard labels; the positive class needs probability strictly above 0.5.
inline std::vector<int> predict(const TrainedModel& model,
                                const std::vector<CleanTweet>& tweets) {
  return probs_to_labels(predict_probabilities(model, tweets));
}

// --- training dispatch -----------------------------------------------------

struct ModelSettings {
  std::array<ForestConfig, kNumCategories> forest{
      ForestConfig::category_default(1), ForestConfig::category_default(2),
      ForestConfig::category_default(3), ForestConfig::category_default(4)};
  RecurrentConfig rnn;
  RecurrentConfig bilstm;
  TransformerConfig transformer;
  std::uint64_t vocab_min_df = 1;

  ModelSettings() { bilstm.bidirectional = true; }
};

// Fits the vocabulary on `data` and trains one classifier of the requested
// kind for `category`. `seed` overrides the per-model config seed so callers
// can derive run-specific streams.
inline TrainedModel train_model(const std::string& kind, int category,
                                const std::vector<LabeledTweet>& data,
                                const ModelSettings& settings, std::uint64_t seed,
                                std::size_t jobs = 1) {
  if (!is_known_model_kind(kind)) throw InvalidArgument("unknown model kind: " + kind);
  if (data.size() < 2) throw TrainError("need at least 2 labeled tweets");
  std::vector<int> y = labels_for_category(data, category);
  std::vector<CleanTweet> tweets = strip_labels(data);

  TrainedModel model;
  model.kind = kind;
  model.category = category;
  model.vocab = build_vocabulary(tweets, settings.vocab_min_df);

  if (kind == "forest") {
    FeatureMatrix x = tfidf(tweets, model.vocab);
    ForestConfig config = settings.forest[category - 1];
    config.seed = seed;
    model.train_wall_clock_s = benchmark([&] {
      model.forest = train_forest(x, y, config, jobs);
    });
    return model;
  }

  if (kind == "rnn" || kind == "bilstm") {
    RecurrentConfig config = kind == "bilstm" ? settings.bilstm : settings.rnn;
    config.bidirectional = kind == "bilstm";
    config.seed = seed;
    auto seqs = encode_sequences(tweets, model.vocab, config.max_len, false);
    TrainResult result = train_recurrent(seqs, y, config, model.vocab.size());
    model.neural = std::move(result.model);
    model.train_wall_clock_s = result.wall_clock_s;
    return model;
  }

  TransformerConfig config = settings.transformer;
  config.seed = seed;
  auto seqs = encode_sequences(tweets, model.vocab, config.max_len, true);
  TrainResult result = train_transformer(seqs, y, config, model.vocab.size());
  model.neural = std::move(result.model);
  model.train_wall_clock_s = result.wall_clock_s;
  return model;
}

// --- checkpoint codec ------------------------------------------------------

namespace detail {

inline std::string format_double_meta(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void meta_kv(std::string& meta, const std::string& key, const std::string& value) {
  meta += key;
  meta += " = ";
  meta += value;
  meta += '\n';
}

struct ParsedMeta {
  std::map<std::string, std::string> kv;
  std::vector<std::pair<std::string, std::uint64_t>> vocab_terms;

  const std::string& need(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("checkpoint meta: missing key " + key);
    return it->second;
  }

  std::uint64_t need_u64(const std::string& key) const {
    try {
      return std::stoull(need(key));
    } catch (const std::exception&) {
      throw FormatError("checkpoint meta: bad integer for " + key);
    }
  }

  double need_double(const std::string& key) const {
    try {
      return std::stod(need(key));
    } catch (const std::exception&) {
      throw FormatError("checkpoint meta: bad number for " + key);
    }
  }

  bool need_bool(const std::string& key) const {
    const std::string& v = need(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw FormatError("checkpoint meta: bad boolean for " + key);
  }
};

inline ParsedMeta parse_meta(const std::string& meta) {
  ParsedMeta out;
  bool in_vocab = false;
  for (const std::string& line : split(meta, '\n')) {
    if (trim(line).empty()) continue;
    if (trim(line) == "[vocab]") {
      in_vocab = true;
      continue;
    }
    if (!in_vocab) {
      std::size_t sep = line.find(" = ");
      if (sep == std::string::npos) throw FormatError("checkpoint meta: bad line: " + line);
      out.kv[line.substr(0, sep)] = line.substr(sep + 3);
    } else {
      std::vector<std::string> f = split(line, '\t');
      if (f.size() != 2) throw FormatError("checkpoint meta: bad vocab line");
      try {
        out.vocab_terms.emplace_back(f[0], std::stoull(f[1]));
      } catch (const std::exception&) {
        throw FormatError("checkpoint meta: bad vocab df");
      }
    }
  }
  return out;
}

inline std::string vocab_meta(const Vocabulary& vocab) {
  std::string out = "[vocab]\n";
  for (std::size_t i = Vocabulary::kFirstTerm; i < vocab.terms.size(); ++i) {
    out += vocab.terms[i];
    out += '\t';
    out += std::to_string(vocab.doc_freq[i]);
    out += '\n';
  }
  return out;
}

inline Vocabulary vocab_from_meta(const ParsedMeta& meta) {
  Vocabulary vocab;
  vocab.document_count = meta.need_u64("vocab.document_count");
  for (const auto& [term, df] : meta.vocab_terms) {
    vocab.index[term] = static_cast<std::uint32_t>(vocab.terms.size());
    vocab.terms.push_back(term);
    vocab.doc_freq.push_back(df);
  }
  return vocab;
}

inline Tensor encode_tree(const DecisionTree& tree) {
  Tensor t(tree.nodes.size(), 5);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    t.at(i, 0) = n.feature;
    t.at(i, 1) = n.threshold;
    t.at(i, 2) = n.left;
    t.at(i, 3) = n.right;
    t.at(i, 4) = n.prob;
  }
  return t;
}

inline DecisionTree decode_tree(const Tensor& t, std::size_t n_features) {
  if (t.cols() != 5 || t.rows() == 0) throw FormatError("checkpoint: bad tree tensor");
  DecisionTree tree;
  std::size_t n = t.rows();
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    TreeNode& node = tree.nodes[i];
    node.feature = static_cast<std::int32_t>(t.at(i, 0));
    node.threshold = t.at(i, 1);
    node.left = static_cast<std::int32_t>(t.at(i, 2));
    node.right = static_cast<std::int32_t>(t.at(i, 3));
    node.prob = t.at(i, 4);
    if (!node.is_leaf()) {
      bool children_ok = node.left > static_cast<std::int32_t>(i) &&
                         node.right > static_cast<std::int32_t>(i) &&
                         node.left < static_cast<std::int32_t>(n) &&
                         node.right < static_cast<std::int32_t>(n);
      if (!children_ok || static_cast<std::size_t>(node.feature) >= n_features) {
        throw FormatError("checkpoint: malformed tree node");
      }
    }
  }
  return tree;
}

}  // namespace detail

inline Checkpoint to_checkpoint(const TrainedModel& model) {
  Checkpoint ckpt;
  std::string meta;
  detail::meta_kv(meta, "tool_version", kVersion);
  detail::meta_kv(meta, "kind", model.kind);
  detail::meta_kv(meta, "category", std::to_string(model.category));
  detail::meta_kv(meta, "wall_clock_s", detail::format_double_meta(model.train_wall_clock_s));
  detail::meta_kv(meta, "vocab.document_count", std::to_string(model.vocab.document_count));
  if (model.kind == "forest") {
    if (!model.forest) throw InvalidArgument("model has no forest payload");
    const ForestConfig& c = model.forest->config;
    detail::meta_kv(meta, "forest.max_depth", std::to_string(c.max_depth));
    detail::meta_kv(meta, "forest.max_features", to_string(c.max_features));
    detail::meta_kv(meta, "forest.n_estimators", std::to_string(c.n_estimators));
    detail::meta_kv(meta, "forest.seed", std::to_string(c.seed));
    detail::meta_kv(meta, "forest.n_trees", std::to_string(model.forest->trees.size()));
    detail::meta_kv(meta, "forest.n_features", std::to_string(model.vocab.size()));
    meta += detail::vocab_meta(model.vocab);
    ckpt.meta = std::move(meta);
    for (std::size_t i = 0; i < model.forest->trees.size(); ++i) {
      ckpt.tensors.emplace_back("tree/" + std::to_string(i),
                                detail::encode_tree(model.forest->trees[i]));
    }
    return ckpt;
  }
  if (!model.neural) throw InvalidArgument("model has no network payload");
  const NeuralModel& nn = *model.neural;
  detail::meta_kv(meta, "max_len", std::to_string(nn.max_len));
  detail::meta_kv(meta, "vocab_size", std::to_string(nn.vocab_size));
  if (nn.arch == Arch::kTransformer) {
    const TransformerConfig& c = nn.transformer;
    detail::meta_kv(meta, "transformer.n_layers", std::to_string(c.n_layers));
    detail::meta_kv(meta, "transformer.n_heads", std::to_string(c.n_heads));
    detail::meta_kv(meta, "transformer.d_model", std::to_string(c.d_model));
    detail::meta_kv(meta, "transformer.ff_dim", std::to_string(c.ff_dim));
    detail::meta_kv(meta, "transformer.max_len", std::to_string(c.max_len));
    detail::meta_kv(meta, "transformer.lr", detail::format_double_meta(c.lr));
    detail::meta_kv(meta, "transformer.batch_size", std::to_string(c.batch_size));
    detail::meta_kv(meta, "transformer.epochs", std::to_string(c.epochs));
    detail::meta_kv(meta, "transformer.reference_protocol",
                    c.reference_protocol ? "true" : "false");
    detail::meta_kv(meta, "transformer.seed", std::to_string(c.seed));
  } else {
    const RecurrentConfig& c = nn.recurrent;
    detail::meta_kv(meta, "recurrent.embed_dim", std::to_string(c.embed_dim));
    detail::meta_kv(meta, "recurrent.hidden_dim", std::to_string(c.hidden_dim));
    detail::meta_kv(meta, "recurrent.bidirectional", c.bidirectional ? "true" : "false");
    detail::meta_kv(meta, "recurrent.max_len", std::to_string(c.max_len));
    detail::meta_kv(meta, "recurrent.lr", detail::format_double_meta(c.lr));
    detail::meta_kv(meta, "recurrent.batch_size", std::to_string(c.batch_size));
    detail::meta_kv(meta, "recurrent.epochs", std::to_string(c.epochs));
    detail::meta_kv(meta, "recurrent.seed", std::to_string(c.seed));
  }
  meta += detail::vocab_meta(model.vocab);
  ckpt.meta = std::move(meta);
  ckpt.tensors = nn.params;
  return ckpt;
}

inline TrainedModel from_checkpoint(const Checkpoint& ckpt) {
  detail::ParsedMeta meta = detail::parse_meta(ckpt.meta);
  TrainedModel model;
  model.kind = meta.need("kind");
  if (!is_known_model_kind(model.kind)) {
    throw FormatError("checkpoint: unknown model kind " + model.kind);
  }
  model.category = static_cast<int>(meta.need_u64("category"));
  model.train_wall_clock_s = meta.need_double("wall_clock_s");
  model.vocab = detail::vocab_from_meta(meta);
  if (model.kind == "forest") {
    RandomForest forest;
    forest.config.max_depth = meta.need_u64("forest.max_depth");
    forest.config.max_features = parse_max_features(meta.need("forest.max_features"));
    forest.config.n_estimators = meta.need_u64("forest.n_estimators");
    forest.config.seed = meta.need_u64("forest.seed");
    std::size_t n_trees = meta.need_u64("forest.n_trees");
    std::size_t n_features = meta.need_u64("forest.n_features");
    if (n_features != model.vocab.size()) {
      throw FormatError("checkpoint: feature count does not match vocabulary");
    }
    for (std::size_t i = 0; i < n_trees; ++i) {
      forest.trees.push_back(
          detail::decode_tree(ckpt.tensor("tree/" + std::to_string(i)), n_features));
    }
    if (forest.trees.empty()) throw FormatError("checkpoint: forest without trees");
    model.forest = std::move(forest);
    return model;
  }
  NeuralModel nn;
  nn.max_len = meta.need_u64("max_len");
  nn.vocab_size = meta.need_u64("vocab_size");
  if (model.kind == "transformer") {
    nn.arch = Arch::kTransformer;
    TransformerConfig c;
    c.n_layers = meta.need_u64("transformer.n_layers");
    c.n_heads = meta.need_u64("transformer.n_heads");
    c.d_model = meta.need_u64("transformer.d_model");
    c.ff_dim = meta.need_u64("transformer.ff_dim");
    c.max_len = meta.need_u64("transformer.max_len");
    c.lr = meta.need_double("transformer.lr");
    c.batch_size = meta.need_u64("transformer.batch_size");
    c.epochs = meta.need_u64("transformer.epochs");
    c.reference_protocol = meta.need_bool("transformer.reference_protocol");
    c.seed = meta.need_u64("transformer.seed");
    c.validate();
    nn.transformer = c;
  } else {
    nn.arch = model.kind == "bilstm" ? Arch::kBilstm : Arch::kLstm;
    RecurrentConfig c;
    c.embed_dim = meta.need_u64("recurrent.embed_dim");
    c.hidden_dim = meta.need_u64("recurrent.hidden_dim");
    c.bidirectional = meta.need_bool("recurrent.bidirectional");
    c.max_len = meta.need_u64("recurrent.max_len");
    c.lr = meta.need_double("recurrent.lr");
    c.batch_size = meta.need_u64("recurrent.batch_size");
    c.epochs = meta.need_u64("recurrent.epochs");
    c.seed = meta.need_u64("recurrent.seed");
    c.validate();
    if (c.bidirectional != (nn.arch == Arch::kBilstm)) {
      throw FormatError("checkpoint: kind and bidirectional flag disagree");
    }
    nn.recurrent = c;
  }
  nn.params = ckpt.tensors;
  if (nn.vocab_size != model.vocab.size()) {
    throw FormatError("checkpoint: vocab_size does not match vocabulary");
  }
  model.neural = std::move(nn);
  // Fail fast on missing parameter tensors.
  model.neural->param("head/w");
  model.neural->param("head/b");
  return model;
}

// --- evaluation driver -------------------------------------------------------

struct EvaluateOptions {
  std::vector<std::string> models{"forest", "rnn", "bilstm", "transformer"};
  std::vector<int> categories{1, 2, 3, 4};
  std::size_t folds = 5;         // forest cross-validation
  std::size_t runs = 5;          // repeated trainings for the networks
  double test_fraction = 0.3;
  bool stratify = false;
  bool vary_split = false;       // re-draw the split for every run seed
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
};

namespace detail {

inline std::vector<LabeledTweet> take_rows(const std::vector<LabeledTweet>& data,
                                           const std::vector<std::size_t>& rows) {
  std::vector<LabeledTweet> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(data[r]);
  return out;
}

// k-fold cross-validation of the per-category forest; the vocabulary is
// refitted on each fold's training part.
inline EvalCell evaluate_forest_cell(const std::vector<LabeledTweet>& data, int category,
                                     const ModelSettings& settings, const EvaluateOptions& opt) {
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  std::string scope = "eval/forest/cat" + std::to_string(category);
  auto folds = kfold(rows, opt.folds, derive_seed(opt.seed, scope + "/folds"));
  std::vector<BinaryMetrics> fold_metrics;
  double wall = benchmark([&] {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> train_rows;
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
      }
      TrainedModel model =
          train_model("forest", category, take_rows(data, train_rows), settings,
                      derive_seed(opt.seed, scope + "/fold" + std::to_string(f)), opt.jobs);
      std::vector<LabeledTweet> test = take_rows(data, folds[f]);
      std::vector<int> y_pred = predict(model, strip_labels(test));
      fold_metrics.push_back(metrics(labels_for_category(test, category), y_pred));
    }
  });
  double n = static_cast<double>(fold_metrics.size());
  EvalCell cell;
  cell.model = "forest";
  cell.category = category;
  double mean_f1 = 0.0, mean_acc = 0.0;
  for (const auto& m : fold_metrics) {
    mean_f1 += m.f1 / n;
    mean_acc += m.accuracy / n;
  }
  double var_f1 = 0.0, var_acc = 0.0;
  for (const auto& m : fold_metrics) {
    var_f1 += (m.f1 - mean_f1) * (m.f1 - mean_f1) / n;
    var_acc += (m.accuracy - mean_acc) * (m.accuracy - mean_acc) / n;
  }
  cell.f1_pct = 100.0 * mean_f1;
  cell.accuracy_pct = 100.0 * mean_acc;
  cell.std_f1 = 100.0 * std::sqrt(var_f1);
  cell.std_acc = 100.0 * std::sqrt(var_acc);
  cell.wall_clock_s = wall;
  cell.seed = opt.seed;
  return cell;
}

// Hold-out evaluation repeated over `runs` seeds. By default the split is
// drawn once per category and shared across runs and network kinds, so run
// variance reflects initialization and batch order only.
inline EvalCell evaluate_network_cell(const std::vector<LabeledTweet>& data,
                                      const std::string& kind, int category,
                                      const ModelSettings& settings,
                                      const EvaluateOptions& opt) {
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  std::uint64_t split_seed = derive_seed(opt.seed, "eval/split/cat" + std::to_string(category));
  std::vector<int> y_all = labels_for_category(data, category);
  auto make_split = [&](std::uint64_t seed) {
    return opt.stratify ? stratified_split(rows, y_all, opt.test_fraction, seed)
                        : split(rows, opt.test_fraction, seed);
  };
  SplitPlan<std::size_t> base_plan = make_split(split_seed);
  std::uint64_t run_base = derive_seed(opt.seed, "eval/" + kind + "/cat" + std::to_string(category));
  RunStats stats;
  double wall = benchmark([&] {
    stats = repeated_runs(
        [&](std::uint64_t run_seed) {
          SplitPlan<std::size_t> plan =
              opt.vary_split ? make_split(derive_seed(run_seed, "split")) : base_plan;
          TrainedModel model = train_model(kind, category, take_rows(data, plan.train_ids),
                                           settings, run_seed, opt.jobs);
          std::vector<LabeledTweet> test = take_rows(data, plan.test_ids);
          std::vector<int> y_pred = predict(model, strip_labels(test));
          return metrics(labels_for_category(test, category), y_pred);
        },
        opt.runs, run_base);
  });
  EvalCell cell;
  cell.model = kind;
  cell.category = category;
  cell.f1_pct = 100.0 * stats.mean_f1;
  cell.accuracy_pct = 100.0 * stats.mean_accuracy;
  cell.std_f1 = 100.0 * stats.std_f1;
  cell.std_acc = 100.0 * stats.std_accuracy;
  cell.wall_clock_s = wall;
  cell.seed = opt.seed;
  return cell;
}

}  // namespace detail

inline EvalReport evaluate_models(const std::vector<LabeledTweet>& data,
                                  const ModelSettings& settings, const EvaluateOptions& opt) {
  if (data.size() < 4) throw TrainError("not enough labeled data to evaluate");
  for (const std::string& kind : opt.models) {
    if (!is_known_model_kind(kind)) throw InvalidArgument("unknown model kind: " + kind);
  }
  for (int c : opt.categories) {
    if (c < 1 || c > kNumCategories) throw InvalidArgument("category must lie in 1..4");
  }
  EvalReport report;
  report.seed = opt.seed;
  for (const std::string& kind : opt.models) {
    for (int category : opt.categories) {
      report.cells.push_back(
          kind == "forest"
              ? detail::evaluate_forest_cell(data, category, settings, opt)
              : detail::evaluate_network_cell(data, kind, category, settings, opt));
    }
  }
  return report;
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_MODELS_HPP_
