#ifndef EDTWEETLAB_FEATURES_HPP_
#define EDTWEETLAB_FEATURES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "edtweetlab/textprep.hpp"
#include "edtweetlab/util.hpp"

namespace edtweetlab {

// Term index with reserved ids for padding, unknown tokens and the sequence
// classification slot. Real terms start at id 3, ordered by descending corpus
// frequency with lexicographic tie-break.
struct Vocabulary {
  static constexpr std::uint32_t kPad = 0;
  static constexpr std::uint32_t kUnk = 1;
  static constexpr std::uint32_t kCls = 2;
  static constexpr std::uint32_t kFirstTerm = 3;

  std::vector<std::string> terms;  // index -> term; first three are markers
  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<std::uint64_t> doc_freq;  // documents containing the term
  std::uint64_t document_count = 0;     // size of the fitting corpus

  Vocabulary() : terms{"<pad>", "<unk>", "<cls>"}, doc_freq{0, 0, 0} {}

  std::size_t size() const { return terms.size(); }
  std::size_t term_count() const { return terms.size() - kFirstTerm; }

  std::uint32_t lookup(const std::string& term) const {
    auto it = index.find(term);
    return it == index.end() ? kUnk : it->second;
  }
};

inline Vocabulary build_vocabulary(const std::vector<CleanTweet>& tweets,
                                   std::uint64_t min_df = 1) {
  if (min_df == 0) throw InvalidArgument("min_df must be at least 1");
  std::unordered_map<std::string, std::uint64_t> df, tf;
  for (const CleanTweet& t : tweets) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const std::string& tok : t.tokens) ++counts[tok];
    for (const auto& [term, count] : counts) {
      ++df[term];
      tf[term] += count;
    }
  }
  std::vector<std::string> kept;
  for (const auto& [term, d] : df) {
    if (d >= min_df) kept.push_back(term);
  }
  std::sort(kept.begin(), kept.end(), [&](const std::string& a, const std::string& b) {
    if (tf[a] != tf[b]) return tf[a] > tf[b];
    return a < b;
  });
  Vocabulary vocab;
  vocab.document_count = tweets.size();
  for (const std::string& term : kept) {
    vocab.index[term] = static_cast<std::uint32_t>(vocab.terms.size());
    vocab.terms.push_back(term);
    vocab.doc_freq.push_back(df[term]);
  }
  return vocab;
}

// (term, total occurrence count) pairs, most frequent first, ties broken
// lexicographically; at most top_k entries.
inline std::vector<std::pair<std::string, std::uint64_t>> term_frequencies(
    const std::vector<CleanTweet>& tweets, std::size_t top_k) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const CleanTweet& t : tweets) {
    for (const std::string& tok : t.tokens) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::uint64_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

// Sparse row-major matrix; each row holds (column, value) entries sorted by
// column. Rows align with row_ids.
struct FeatureMatrix {
  struct Entry {
    std::uint32_t col;
    double value;
  };

  std::size_t n_cols = 0;
  std::vector<std::string> row_ids;
  std::vector<std::vector<Entry>> rows;

  std::size_t n_rows() const { return rows.size(); }

  double at(std::size_t r, std::uint32_t c) const {
    const auto& row = rows[r];
    auto it = std::lower_bound(row.begin(), row.end(), c,
                               [](const Entry& e, std::uint32_t col) { return e.col < col; });
    return (it != row.end() && it->col == c) ? it->value : 0.0;
  }

  std::vector<double> dense_row(std::size_t r) const {
    std::vector<double> out(n_cols, 0.0);
    for (const Entry& e : rows[r]) out[e.col] = e.value;
    return out;
  }
};

// tf-idf with smoothed document frequencies: weight = tf * (ln((1+N)/(1+df)) + 1),
// then each row is L2-normalized. N is the document count of the corpus the
// vocabulary was fitted on; out-of-vocabulary tokens are ignored, so a tweet
// of only unseen tokens yields an all-zero row.
inline FeatureMatrix tfidf(const std::vector<CleanTweet>& tweets, const Vocabulary& vocab) {
  FeatureMatrix m;
  m.n_cols = vocab.size();
  m.row_ids.reserve(tweets.size());
  m.rows.reserve(tweets.size());
  const double n_docs = static_cast<double>(vocab.document_count);
  for (const CleanTweet& t : tweets) {
    std::map<std::uint32_t, double> tf;
    for (const std::string& tok : t.tokens) {
      auto it = vocab.index.find(tok);
      if (it != vocab.index.end()) tf[it->second] += 1.0;
    }
    std::vector<FeatureMatrix::Entry> row;
    row.reserve(tf.size());
    double sq = 0.0;
    for (const auto& [col, count] : tf) {
      double df = static_cast<double>(vocab.doc_freq[col]);
      double w = count * (std::log((1.0 + n_docs) / (1.0 + df)) + 1.0);
      row.push_back({col, w});
      sq += w * w;
    }
    if (sq > 0.0) {
      double inv = 1.0 / std::sqrt(sq);
      for (auto& e : row) e.value *= inv;
    }
    m.row_ids.push_back(t.id);
    m.rows.push_back(std::move(row));
  }
  return m;
}

// Fixed-width id sequences for the sequence models: optional leading CLS
// marker, then token ids (unknowns -> UNK), truncated to max_len and padded
// with PAD on the right.
inline std::vector<std::vector<std::uint32_t>> encode_sequences(
    const std::vector<CleanTweet>& tweets, const Vocabulary& vocab, std::size_t max_len,
    bool with_cls) {
  if (max_len == 0) throw InvalidArgument("max_len must be at least 1");
  std::vector<std::vector<std::uint32_t>> out;
  out.reserve(tweets.size());
  for (const CleanTweet& t : tweets) {
    std::vector<std::uint32_t> ids;
    ids.reserve(max_len);
    if (with_cls) ids.push_back(Vocabulary::kCls);
    for (const std::string& tok : t.tokens) {
      if (ids.size() >= max_len) break;
      ids.push_back(vocab.lookup(tok));
    }
    ids.resize(max_len, Vocabulary::kPad);
    out.push_back(std::move(ids));
  }
  return out;
}

// --- labels ------------------------------------------------------------------

inline constexpr int kNumCategories = 4;

struct LabeledTweet {
  CleanTweet tweet;
  std::array<std::uint8_t, kNumCategories> labels{};  // one binary label per category
};

struct CategoryDistribution {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double fraction = 0.0;  // positives / n
};

inline std::array<CategoryDistribution, kNumCategories> label_distribution(
    const std::vector<LabeledTweet>& data) {
  if (data.empty()) throw InvalidArgument("label distribution of an empty dataset");
  std::array<CategoryDistribution, kNumCategories> out{};
  for (const LabeledTweet& t : data) {
    for (int c = 0; c < kNumCategories; ++c) {
      if (t.labels[c]) {
        ++out[c].positives;
      } else {
        ++out[c].negatives;
      }
    }
  }
  for (int c = 0; c < kNumCategories; ++c) {
    out[c].fraction = static_cast<double>(out[c].positives) / static_cast<double>(data.size());
  }
  return out;
}

// Label file: CSV "id,cat1,cat2,cat3,cat4" (header optional), labels 0 or 1.
inline std::unordered_map<std::string, std::array<std::uint8_t, kNumCategories>> load_labels(
    const std::filesystem::path& path) {
  std::string content = read_file(path);
  std::unordered_map<std::string, std::array<std::uint8_t, kNumCategories>> out;
  std::size_t lineno = 0;
  for (const std::string& line : split(content, '\n')) {
    ++lineno;
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    std::vector<std::string> fields = split(stripped, ',');
    if (fields.size() != 1 + kNumCategories) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected id plus " + std::to_string(kNumCategories) + " labels");
    }
    std::string id = trim(fields[0]);
    if (lineno == 1 && to_lower(id) == "id") continue;  // header
    std::array<std::uint8_t, kNumCategories> labels{};
    for (int c = 0; c < kNumCategories; ++c) {
      std::string v = trim(fields[c + 1]);
      if (v == "0") {
        labels[c] = 0;
      } else if (v == "1") {
        labels[c] = 1;
      } else {
        throw FormatError(path.string() + ":" + std::to_string(lineno) +
                          ": label values must be 0 or 1");
      }
    }
    if (!out.emplace(id, labels).second) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": duplicate id " + id);
    }
  }
  return out;
}

struct JoinResult {
  std::vector<LabeledTweet> data;  // tweets with labels, input order preserved
  std::size_t unlabeled = 0;       // clean tweets without a label row
};

inline JoinResult join_labels(
    const std::vector<CleanTweet>& tweets,
    const std::unordered_map<std::string, std::array<std::uint8_t, kNumCategories>>& labels) {
  JoinResult r;
  for (const CleanTweet& t : tweets) {
    auto it = labels.find(t.id);
    if (it == labels.end()) {
      ++r.unlabeled;
      continue;
    }
    r.data.push_back({t, it->second});
  }
  return r;
}

inline std::vector<CleanTweet> strip_labels(const std::vector<LabeledTweet>& data) {
  std::vector<CleanTweet> out;
  out.reserve(data.size());
  for (const LabeledTweet& t : data) out.push_back(t.tweet);
  return out;
}

inline std::vector<int> labels_for_category(const std::vector<LabeledTweet>& data, int category) {
  if (category < 1 || category > kNumCategories) {
    throw InvalidArgument("category must lie in 1..4");
  }
  std::vector<int> y;
  y.reserve(data.size());
  for (const LabeledTweet& t : data) y.push_back(t.labels[category - 1]);
  return y;
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_FEATURES_HPP_
