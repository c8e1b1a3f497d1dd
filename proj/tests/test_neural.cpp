#include <gtest/gtest.h>

#include <cmath>

#include "edtweetlab/models.hpp"

using namespace edtweetlab;

namespace {

constexpr std::uint32_t kMarker = 5;

// fixed-width id sequences; class 1 iff the marker token appears
void token_presence_task(std::vector<std::vector<std::uint32_t>>& seqs, std::vector<int>& y,
                         std::size_t n, std::size_t width, bool with_cls, std::uint64_t seed) {
  Rng rng(seed);
  seqs.clear();
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    int label = static_cast<int>(i % 2);
    std::size_t body = with_cls ? width - 1 : width;
    std::size_t len = 3 + rng.index(body - 2);  // in [3, body]
    std::vector<std::uint32_t> ids;
    if (with_cls) ids.push_back(Vocabulary::kCls);
    for (std::size_t t = 0; t < len; ++t) {
      std::uint32_t filler[] = {3, 4, 6, 7, 8};
      ids.push_back(filler[rng.index(5)]);
    }
    if (label == 1) ids[with_cls ? 1 + rng.index(len) : rng.index(len)] = kMarker;
    ids.resize(width, Vocabulary::kPad);
    seqs.push_back(std::move(ids));
    y.push_back(label);
  }
}

double accuracy_against(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += (pred[i] == truth[i]);
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

LabeledTweet make_labeled(const std::string& id, const std::vector<std::string>& tokens,
                          std::uint8_t cat1) {
  LabeledTweet t;
  t.tweet.id = id;
  t.tweet.tokens = tokens;
  t.tweet.normalized_text = join_tokens(tokens);
  t.labels = {cat1, 0, cat1, 0};
  return t;
}

// two disjoint token families, category-1 label keyed to one of them
std::vector<LabeledTweet> tiny_labeled_corpus() {
  std::vector<LabeledTweet> data;
  const char* pos_words[] = {"fasting", "guilt", "purge", "scale", "burn"};
  const char* neg_words[] = {"brunch", "recipe", "salad", "family", "picnic"};
  Rng rng(404);
  for (int i = 0; i < 24; ++i) {
    bool pos = i % 2 == 0;
    const char** bank = pos ? pos_words : neg_words;
    std::vector<std::string> toks;
    for (int t = 0; t < 4; ++t) toks.push_back(bank[rng.index(5)]);
    data.push_back(make_labeled("d" + std::to_string(i), toks, pos ? 1 : 0));
  }
  return data;
}

ModelSettings tiny_settings() {
  ModelSettings s;
  for (int c = 0; c < 4; ++c) {
    s.forest[c].n_estimators = 12;
    s.forest[c].max_depth = 4;
  }
  s.rnn.embed_dim = 8;
  s.rnn.hidden_dim = 8;
  s.rnn.epochs = 2;
  s.rnn.batch_size = 8;
  s.rnn.lr = 0.01;
  s.rnn.max_len = 10;
  s.bilstm = s.rnn;
  s.bilstm.bidirectional = true;
  s.transformer.n_layers = 1;
  s.transformer.n_heads = 2;
  s.transformer.d_model = 8;
  s.transformer.ff_dim = 16;
  s.transformer.epochs = 1;
  s.transformer.batch_size = 8;
  s.transformer.lr = 0.01;
  s.transformer.max_len = 10;
  return s;
}

LstmCellParams cell_from_model(const NeuralModel& m, const std::string& prefix) {
  LstmCellParams p;
  p.input_size = m.recurrent.embed_dim;
  p.hidden_size = m.recurrent.hidden_dim;
  p.wi = m.param(prefix + "/wi");
  p.wf = m.param(prefix + "/wf");
  p.wo = m.param(prefix + "/wo");
  p.wg = m.param(prefix + "/wg");
  p.ui = m.param(prefix + "/ui");
  p.uf = m.param(prefix + "/uf");
  p.uo = m.param(prefix + "/uo");
  p.ug = m.param(prefix + "/ug");
  p.bi = m.param(prefix + "/bi");
  p.bf = m.param(prefix + "/bf");
  p.bo = m.param(prefix + "/bo");
  p.bg = m.param(prefix + "/bg");
  return p;
}

// per-example reference: scan the trimmed sequence one token at a time
double recurrent_prob_reference(const NeuralModel& m, const std::vector<std::uint32_t>& seq) {
  std::size_t len = seq.size();
  while (len > 0 && seq[len - 1] == Vocabulary::kPad) --len;
  const Tensor& emb = m.param("embedding");
  auto run_direction = [&](const std::string& prefix, bool reversed) {
    LstmCellParams cell = cell_from_model(m, prefix);
    Tensor h(1, m.recurrent.hidden_dim), c(1, m.recurrent.hidden_dim);
    for (std::size_t step = 0; step < len; ++step) {
      std::uint32_t id = seq[reversed ? len - 1 - step : step];
      Tensor x(1, m.recurrent.embed_dim);
      for (std::size_t j = 0; j < x.cols(); ++j) x[j] = emb.at(id, j);
      auto [h2, c2] = lstm_cell_forward(x, h, c, cell);
      h = std::move(h2);
      c = std::move(c2);
    }
    return h;
  };
  Tensor features = run_direction("fwd", false);
  if (m.arch == Arch::kBilstm) {
    features = ten::concat_cols(features, run_direction("bwd", true));
  }
  Tensor logit = ten::add_rowwise(ten::matmul(features, m.param("head/w")), m.param("head/b"));
  return ten::sigmoid_scalar(logit.item());
}

// full-width masked encoder reference, pads included in the rows but hidden
// from attention by a -inf additive mask
double transformer_prob_masked_reference(const NeuralModel& m,
                                         const std::vector<std::uint32_t>& seq) {
  const TransformerConfig& cfg = m.transformer;
  std::size_t width = seq.size();
  std::size_t len = width;
  while (len > 0 && seq[len - 1] == Vocabulary::kPad) --len;
  Tensor mask(1, width);
  for (std::size_t t = 0; t < width; ++t) {
    mask.at(0, t) = t < len ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  detail::LeafSet leaves = detail::LeafSet::from(m, false);
  ag::Var x = ag::add(ag::embedding_rows(leaves.at("tok_embedding"), seq),
                      ag::slice_rows(leaves.at("pos_embedding"), 0, width));
  std::size_t d_head = cfg.d_model / cfg.n_heads;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    std::string p = "layer" + std::to_string(l);
    ag::Var q = ag::matmul(x, leaves.at(p + "/attn/wq"));
    ag::Var k = ag::matmul(x, leaves.at(p + "/attn/wk"));
    ag::Var v = ag::matmul(x, leaves.at(p + "/attn/wv"));
    ag::Var heads;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      ag::Var attn = attention_graph(ag::slice_cols(q, h * d_head, d_head),
                                     ag::slice_cols(k, h * d_head, d_head),
                                     ag::slice_cols(v, h * d_head, d_head), &mask);
      heads = h == 0 ? attn : ag::concat_cols(heads, attn);
    }
    x = ag::layer_norm(ag::add(x, ag::matmul(heads, leaves.at(p + "/attn/wo"))),
                       leaves.at(p + "/ln1/gamma"), leaves.at(p + "/ln1/beta"));
    ag::Var ff = ag::add_rowwise(
        ag::matmul(ag::gelu(ag::add_rowwise(ag::matmul(x, leaves.at(p + "/ff/w1")),
                                            leaves.at(p + "/ff/b1"))),
                   leaves.at(p + "/ff/w2")),
        leaves.at(p + "/ff/b2"));
    x = ag::layer_norm(ag::add(x, ff), leaves.at(p + "/ln2/gamma"), leaves.at(p + "/ln2/beta"));
  }
  ag::Var cls = ag::slice_rows(x, 0, 1);
  ag::Var logit = ag::add(ag::matmul(cls, leaves.at("head/w")), leaves.at("head/b"));
  return ag::sigmoid(logit).value().item();
}

}  // namespace

TEST(NetworkConfig, ValidationRules) {
  RecurrentConfig r;
  r.embed_dim = 0;
  EXPECT_THROW(r.validate(), InvalidArgument);
  r = RecurrentConfig{};
  r.batch_size = 0;
  EXPECT_THROW(r.validate(), InvalidArgument);
  r = RecurrentConfig{};
  r.lr = 0.0;
  EXPECT_THROW(r.validate(), InvalidArgument);

  TransformerConfig t;
  t.d_model = 30;
  t.n_heads = 4;
  EXPECT_THROW(t.validate(), InvalidArgument);
  t = TransformerConfig{};
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), InvalidArgument);
  t = TransformerConfig{};
  EXPECT_NO_THROW(t.validate());
}

TEST(NetworkConfig, FixedProtocolPinsTuningKnobs) {
  TransformerConfig t;
  t.lr = 0.5;
  t.batch_size = 7;
  t.epochs = 99;
  t.d_model = 32;
  t.reference_protocol = true;
  TransformerConfig n = t.normalized();
  EXPECT_DOUBLE_EQ(n.lr, 2e-5);
  EXPECT_EQ(n.batch_size, 32u);
  EXPECT_EQ(n.epochs, 15u);
  EXPECT_EQ(n.d_model, 32u);
  t.reference_protocol = false;
  n = t.normalized();
  EXPECT_DOUBLE_EQ(n.lr, 0.5);
  EXPECT_EQ(n.epochs, 99u);
}

TEST(NetworkConfig, ArchNames) {
  EXPECT_EQ(to_string(Arch::kLstm), "rnn");
  EXPECT_EQ(to_string(Arch::kBilstm), "bilstm");
  EXPECT_EQ(to_string(Arch::kTransformer), "transformer");
}

TEST(TrainRecurrent, RejectsBadInputs) {
  RecurrentConfig cfg;
  EXPECT_THROW(train_recurrent({}, {}, cfg, 10), TrainError);
  std::vector<std::vector<std::uint32_t>> seqs{{3, 4}};
  EXPECT_THROW(train_recurrent(seqs, {0, 1}, cfg, 10), TrainError);
  EXPECT_THROW(train_recurrent(seqs, {2}, cfg, 10), TrainError);
  EXPECT_THROW(init_recurrent_model(cfg, 2, 4), InvalidArgument);
}

TEST(TrainRecurrent, ZeroEpochsStaysNearOneHalf) {
  std::vector<std::vector<std::uint32_t>> seqs;
  std::vector<int> y;
  token_presence_task(seqs, y, 30, 6, false, 1);
  RecurrentConfig cfg;
  cfg.embed_dim = 12;
  cfg.hidden_dim = 12;
  cfg.epochs = 0;
  cfg.max_len = 6;
  TrainResult r = train_recurrent(seqs, y, cfg, 9);
  EXPECT_TRUE(r.epoch_loss.empty());
  std::vector<double> probs = predict_probs(r.model, seqs);
  double mean = 0.0;
  for (double p : probs) mean += p / static_cast<double>(probs.size());
  EXPECT_GT(mean, 0.4);
  EXPECT_LT(mean, 0.6);
}

TEST(TrainRecurrent, LstmLearnsTokenPresence) {
  std::vector<std::vector<std::uint32_t>> seqs;
  std::vector<int> y;
  token_presence_task(seqs, y, 60, 6, false, 2);
  RecurrentConfig cfg;
  cfg.embed_dim = 12;
  cfg.hidden_dim = 12;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.lr = 0.02;
  cfg.max_len = 6;
  cfg.seed = 11;
  TrainResult r = train_recurrent(seqs, y, cfg, 9);
  ASSERT_EQ(r.epoch_loss.size(), 30u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  std::vector<int> pred = probs_to_labels(predict_probs(r.model, seqs));
  EXPECT_GE(accuracy_against(pred, y), 0.95);
}

TEST(TrainRecurrent, BilstmLearnsTokenPresence) {
  std::vector<std::vector<std::uint32_t>> seqs;
  std::vector<int> y;
  token_presence_task(seqs, y, 60, 6, false, 3);
  RecurrentConfig cfg;
  cfg.embed_dim = 12;
  cfg.hidden_dim = 12;
  cfg.bidirectional = true;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.lr = 0.02;
  cfg.max_len = 6;
  cfg.seed = 12;
  TrainResult r = train_recurrent(seqs, y, cfg, 9);
  EXPECT_EQ(r.model.arch, Arch::kBilstm);
  std::vector<int> pred = probs_to_labels(predict_probs(r.model, seqs));
  EXPECT_GE(accuracy_against(pred, y), 0.95);
}

TEST(TrainTransformer, LearnsTokenPresence) {
  std::vector<std::vector<std::uint32_t>> seqs;
  std::vector<int> y;
  token_presence_task(seqs, y, 60, 8, true, 4);
  TransformerConfig cfg;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_model = 16;
  cfg.ff_dim = 32;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.lr = 0.01;
  cfg.max_len = 8;
  cfg.seed = 13;
  TrainResult r = train_transformer(seqs, y, cfg, 9);
  std::vector<int> pred = probs_to_labels(predict_probs(r.model, seqs));
  EXPECT_GE(accuracy_against(pred, y), 0.95);
}

TEST(TrainTransformer, RequiresLeadingClsToken) {
  std::vector<std::vector<std::uint32_t>> seqs{{3, 4, 5, 0}};
  std::vector<int> y{1};
  TransformerConfig cfg;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_model = 8;
  cfg.ff_dim = 16;
  cfg.epochs = 1;
  cfg.max_len = 4;
  EXPECT_THROW(train_transformer(seqs, y, cfg, 9), InvalidArgument);
}

TEST(Determinism, SameSeedReproducesEveryParameterBit) {
  std::vector<std::vector<std::uint32_t>> seqs;
  std::vector<int> y;
  token_presence_task(seqs, y, 30, 6, false, 6);
  RecurrentConfig cfg;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 8;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.max_len = 6;
  cfg.seed = 77;
  NeuralModel a = train_recurrent(seqs, y, cfg, 9).model;
  NeuralModel b = train_recurrent(seqs, y, cfg, 9).model;
  ASSERT_EQ(a.params.size(), b.params.size());
  for (std::size_t k = 0; k < a.params.size(); ++k) {
    EXPECT_EQ(a.params[k].first, b.params[k].first);
    const Tensor &ta = a.params[k].second, &tb = b.params[k].second;
    ASSERT_EQ(ta.size(), tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
      ASSERT_EQ(ta[i], tb[i]) << a.params[k].first << " entry " << i;
    }
  }

  cfg.seed = 78;
  NeuralModel c = train_recurrent(seqs, y, cfg, 9).model;
  bool any_difference = false;
  for (std::size_t k = 0; k < a.params.size() && !any_difference; ++k) {
    for (std::size_t i = 0; i < a.params[k].second.size(); ++i) {
      if (a.params[k].second[i] != c.params[k].second[i]) {
        any_difference = true;
        break;
      }
    }
  }
  EXPECT_TRUE(any_difference);
}

TEST(MaskedBatching, LstmMatchesPerExampleScan) {
  RecurrentConfig cfg;
  cfg.embed_dim = 6;
  cfg.hidden_dim = 5;
  cfg.max_len = 8;
  cfg.seed = 50;
  NeuralModel m = init_recurrent_model(cfg, 12, 8);
  std::vector<std::vector<std::uint32_t>> seqs{
      {3, 4, 5, 6, 7, 8, 9, 10},
      {4, 5, 6, 0, 0, 0, 0, 0},
      {0, 0, 0, 0, 0, 0, 0, 0},
      {11, 3, 11, 3, 11, 0, 0, 0},
      {10, 9, 8, 7, 6, 5, 4, 3},
  };
  std::vector<double> batched = predict_probs(m, seqs);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    EXPECT_NEAR(batched[i], recurrent_prob_reference(m, seqs[i]), 1e-9) << "sequence " << i;
  }
}

TEST(MaskedBatching, BilstmMatchesPerExampleScan) {
  RecurrentConfig cfg;
  cfg.embed_dim = 6;
  cfg.hidden_dim = 4;
  cfg.bidirectional = true;
  cfg.max_len = 7;
  cfg.seed = 51;
  NeuralModel m = init_recurrent_model(cfg, 12, 7);
  std::vector<std::vector<std::uint32_t>> seqs{
      {3, 4, 5, 6, 7, 8, 9},
      {9, 8, 0, 0, 0, 0, 0},
      {3, 0, 0, 0, 0, 0, 0},
      {6, 6, 6, 6, 0, 0, 0},
  };
  std::vector<double> batched = predict_probs(m, seqs);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    EXPECT_NEAR(batched[i], recurrent_prob_reference(m, seqs[i]), 1e-9) << "sequence " << i;
  }
}

TEST(MaskedBatching, TransformerTrimEqualsMaskedFullWidth) {
  TransformerConfig cfg;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_model = 12;
  cfg.ff_dim = 24;
  cfg.max_len = 8;
  cfg.seed = 52;
  NeuralModel m = init_transformer_model(cfg, 12, 8);
  std::vector<std::vector<std::uint32_t>> seqs{
      {Vocabulary::kCls, 3, 4, 5, 6, 7, 8, 9},
      {Vocabulary::kCls, 10, 11, 0, 0, 0, 0, 0},
      {Vocabulary::kCls, 0, 0, 0, 0, 0, 0, 0},
  };
  std::vector<double> trimmed = predict_probs(m, seqs);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    EXPECT_NEAR(trimmed[i], transformer_prob_masked_reference(m, seqs[i]), 1e-9)
        << "sequence " << i;
  }
}

TEST(ProbsToLabels, StrictThreshold) {
  EXPECT_EQ(probs_to_labels({0.5, 0.500001, 0.499999, 1.0, 0.0}),
            (std::vector<int>{0, 1, 0, 1, 0}));
}

TEST(ModelKinds, KnownNames) {
  EXPECT_TRUE(is_known_model_kind("forest"));
  EXPECT_TRUE(is_known_model_kind("rnn"));
  EXPECT_TRUE(is_known_model_kind("bilstm"));
  EXPECT_TRUE(is_known_model_kind("transformer"));
  EXPECT_FALSE(is_known_model_kind("svm"));
  EXPECT_FALSE(is_known_model_kind(""));
}

TEST(TrainModelDispatch, AllKindsFitSeparableTokens) {
  std::vector<LabeledTweet> data = tiny_labeled_corpus();
  ModelSettings settings = tiny_settings();
  for (std::string kind : {"forest", "rnn", "bilstm", "transformer"}) {
    TrainedModel model = train_model(kind, 1, data, settings, 21);
    EXPECT_EQ(model.kind, kind);
    EXPECT_EQ(model.category, 1);
    EXPECT_GE(model.train_wall_clock_s, 0.0);
    std::vector<double> probs = predict_probabilities(model, strip_labels(data));
    EXPECT_EQ(probs.size(), data.size());
    for (double p : probs) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
  EXPECT_THROW(train_model("svm", 1, data, settings, 21), InvalidArgument);
  std::vector<LabeledTweet> too_small{data[0]};
  EXPECT_THROW(train_model("forest", 1, too_small, settings, 21), TrainError);
}

TEST(CheckpointCodec, RoundTripsEveryKindBitExactly) {
  std::vector<LabeledTweet> data = tiny_labeled_corpus();
  std::vector<CleanTweet> tweets = strip_labels(data);
  ModelSettings settings = tiny_settings();
  for (std::string kind : {"forest", "rnn", "bilstm", "transformer"}) {
    TrainedModel model = train_model(kind, 2, data, settings, 33);
    std::vector<double> before = predict_probabilities(model, tweets);
    std::string bytes = serialize_checkpoint(to_checkpoint(model));
    TrainedModel restored = from_checkpoint(deserialize_checkpoint(bytes));
    EXPECT_EQ(restored.kind, kind);
    EXPECT_EQ(restored.category, 2);
    EXPECT_EQ(restored.vocab.size(), model.vocab.size());
    std::vector<double> after = predict_probabilities(restored, tweets);
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      EXPECT_DOUBLE_EQ(before[i], after[i]) << kind << " row " << i;
    }
    EXPECT_EQ(serialize_checkpoint(to_checkpoint(restored)), bytes) << kind;
  }
}

TEST(CheckpointCodec, RejectsCorruptContainers) {
  std::vector<LabeledTweet> data = tiny_labeled_corpus();
  ModelSettings settings = tiny_settings();
  TrainedModel model = train_model("rnn", 1, data, settings, 44);
  std::string bytes = serialize_checkpoint(to_checkpoint(model));

  std::string truncated = bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(deserialize_checkpoint(truncated), FormatError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), FormatError);

  std::string trailing = bytes + "junk";
  EXPECT_THROW(deserialize_checkpoint(trailing), FormatError);

  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(deserialize_checkpoint(bad_version), FormatError);
}

TEST(CheckpointCodec, RejectsMalformedTreeTopology) {
  std::vector<LabeledTweet> data = tiny_labeled_corpus();
  ModelSettings settings = tiny_settings();
  TrainedModel model = train_model("forest", 1, data, settings, 55);
  Checkpoint ckpt = to_checkpoint(model);
  for (auto& [name, tensor] : ckpt.tensors) {
    if (name == "tree/0") {
      // internal node whose left child points at itself
      tensor.at(0, 0) = 0.0;
      tensor.at(0, 2) = 0.0;
      tensor.at(0, 3) = tensor.rows() > 1 ? 1.0 : 0.0;
      break;
    }
  }
  EXPECT_THROW(from_checkpoint(ckpt), FormatError);
}

TEST(CheckpointCodec, RejectsVocabSizeMismatch) {
  std::vector<LabeledTweet> data = tiny_labeled_corpus();
  ModelSettings settings = tiny_settings();
  TrainedModel model = train_model("rnn", 1, data, settings, 66);
  Checkpoint ckpt = to_checkpoint(model);
  std::string key = "vocab_size = " + std::to_string(model.vocab.size());
  std::size_t pos = ckpt.meta.find(key);
  ASSERT_NE(pos, std::string::npos);
  ckpt.meta.replace(pos, key.size(),
                    "vocab_size = " + std::to_string(model.vocab.size() + 1));
  EXPECT_THROW(from_checkpoint(ckpt), FormatError);
}

TEST(CheckpointCodec, RejectsMissingMetaKey) {
  Checkpoint ckpt;
  ckpt.meta = "kind = rnn\n";
  EXPECT_THROW(from_checkpoint(ckpt), FormatError);
  ckpt.meta = "kind = spaceship\ncategory = 1\n";
  EXPECT_THROW(from_checkpoint(ckpt), FormatError);
}
