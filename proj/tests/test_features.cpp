#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "edtweetlab/features.hpp"
#include "edtweetlab/textprep.hpp"
#include "edtweetlab/util.hpp"

using namespace edtweetlab;

namespace {

CleanTweet ct(std::string id, std::vector<std::string> tokens) {
  return make_clean_tweet(std::move(id), std::move(tokens));
}

std::vector<CleanTweet> abc_corpus() {
  return {ct("d1", {"a", "b"}), ct("d2", {"a", "c"}), ct("d3", {"c"})};
}

}  // namespace

TEST(Vocabulary, ReservedIdsAlwaysPresent) {
  Vocabulary v = build_vocabulary({}, 1);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.terms[Vocabulary::kPad], "<pad>");
  EXPECT_EQ(v.terms[Vocabulary::kUnk], "<unk>");
  EXPECT_EQ(v.terms[Vocabulary::kCls], "<cls>");
  EXPECT_EQ(v.lookup("anything"), Vocabulary::kUnk);
  EXPECT_EQ(v.document_count, 0u);
}

TEST(Vocabulary, FrequencyThenLexicographicOrder) {
  Vocabulary v = build_vocabulary(abc_corpus(), 1);
  // a: freq 2 df 2; c: freq 2 df 2; b: freq 1 df 1
  ASSERT_EQ(v.size(), 6u);
  EXPECT_EQ(v.terms[3], "a");
  EXPECT_EQ(v.terms[4], "c");
  EXPECT_EQ(v.terms[5], "b");
  EXPECT_EQ(v.doc_freq[v.lookup("a")], 2u);
  EXPECT_EQ(v.doc_freq[v.lookup("c")], 2u);
  EXPECT_EQ(v.doc_freq[v.lookup("b")], 1u);
  EXPECT_EQ(v.document_count, 3u);
  EXPECT_EQ(v.lookup("a"), 3u);
}

TEST(Vocabulary, MinDfFiltersRareTerms) {
  Vocabulary v = build_vocabulary({ct("d1", {"a", "b"}), ct("d2", {"a"})}, 2);
  EXPECT_EQ(v.lookup("a"), 3u);
  EXPECT_EQ(v.lookup("b"), Vocabulary::kUnk);
  EXPECT_THROW(build_vocabulary({}, 0), InvalidArgument);
}

TEST(TermFrequencies, HandCounts) {
  auto top = term_frequencies({ct("d", {"x", "x", "y"})}, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0], (std::pair<std::string, std::uint64_t>{"x", 2}));
  EXPECT_EQ(top[1], (std::pair<std::string, std::uint64_t>{"y", 1}));
  EXPECT_TRUE(term_frequencies({}, 5).empty());
  // lexicographic tie-break
  auto tied = term_frequencies({ct("d", {"z", "m"})}, 5);
  ASSERT_EQ(tied.size(), 2u);
  EXPECT_EQ(tied[0].first, "m");
  EXPECT_EQ(tied[1].first, "z");
  // top_k truncates
  EXPECT_EQ(term_frequencies({ct("d", {"x", "y", "z"})}, 1).size(), 1u);
}

TEST(Tfidf, SingleDocSingleTerm) {
  std::vector<CleanTweet> docs{ct("d", {"a", "a"})};
  Vocabulary v = build_vocabulary(docs, 1);
  FeatureMatrix m = tfidf(docs, v);
  ASSERT_EQ(m.n_rows(), 1u);
  EXPECT_EQ(m.row_ids[0], "d");
  // idf = ln(2/2)+1 = 1, raw weight 2, row normalizes to exactly 1.0
  EXPECT_DOUBLE_EQ(m.at(0, v.lookup("a")), 1.0);
}

TEST(Tfidf, TwoDocHandComputation) {
  std::vector<CleanTweet> docs{ct("d1", {"a", "a", "b"}), ct("d2", {"a", "c"})};
  Vocabulary v = build_vocabulary(docs, 1);
  FeatureMatrix m = tfidf(docs, v);
  // idf(a) = ln(3/3)+1 = 1; idf(b) = idf(c) = ln(3/2)+1
  double idf_rare = std::log(3.0 / 2.0) + 1.0;
  double n1 = std::sqrt(2.0 * 2.0 + idf_rare * idf_rare);
  EXPECT_NEAR(m.at(0, v.lookup("a")), 2.0 / n1, 1e-12);
  EXPECT_NEAR(m.at(0, v.lookup("b")), idf_rare / n1, 1e-12);
  EXPECT_DOUBLE_EQ(m.at(0, v.lookup("c")), 0.0);
  double n2 = std::sqrt(1.0 + idf_rare * idf_rare);
  EXPECT_NEAR(m.at(1, v.lookup("a")), 1.0 / n2, 1e-12);
  EXPECT_NEAR(m.at(1, v.lookup("c")), idf_rare / n2, 1e-12);
}

TEST(Tfidf, RowsAreUnitNormOrZero) {
  std::vector<CleanTweet> docs{ct("d1", {"a", "b", "b"}), ct("d2", {"zzz"}), ct("d3", {})};
  Vocabulary v = build_vocabulary({docs[0]}, 1);  // d2's token is out of vocabulary
  FeatureMatrix m = tfidf(docs, v);
  double sq = 0.0;
  for (const auto& e : m.rows[0]) sq += e.value * e.value;
  EXPECT_NEAR(sq, 1.0, 1e-9);
  EXPECT_TRUE(m.rows[1].empty());
  EXPECT_TRUE(m.rows[2].empty());
}

TEST(EncodeSequences, ClsTruncatePad) {
  std::vector<CleanTweet> docs{ct("d", {"eat"})};
  Vocabulary v = build_vocabulary(docs, 1);
  std::uint32_t eat = v.lookup("eat");
  auto seqs = encode_sequences(docs, v, 4, true);
  ASSERT_EQ(seqs.size(), 1u);
  EXPECT_EQ(seqs[0], (std::vector<std::uint32_t>{Vocabulary::kCls, eat, 0, 0}));

  auto no_cls = encode_sequences({ct("d", {})}, v, 4, true);
  EXPECT_EQ(no_cls[0], (std::vector<std::uint32_t>{Vocabulary::kCls, 0, 0, 0}));

  std::vector<std::string> ten(10, "eat");
  auto truncated = encode_sequences({ct("d", ten)}, v, 4, false);
  EXPECT_EQ(truncated[0], (std::vector<std::uint32_t>(4, eat)));

  auto cls_trunc = encode_sequences({ct("d", ten)}, v, 4, true);
  EXPECT_EQ(cls_trunc[0], (std::vector<std::uint32_t>{Vocabulary::kCls, eat, eat, eat}));

  auto oov = encode_sequences({ct("d", {"unknownword"})}, v, 3, false);
  EXPECT_EQ(oov[0], (std::vector<std::uint32_t>{Vocabulary::kUnk, 0, 0}));

  EXPECT_THROW(encode_sequences(docs, v, 0, false), InvalidArgument);
}

TEST(Labels, DistributionHandCase) {
  std::vector<LabeledTweet> data;
  for (int bits : {0b0001, 0b0000, 0b0011, 0b0001}) {
    LabeledTweet t;
    t.tweet = ct("x" + std::to_string(data.size()), {"tok"});
    for (int c = 0; c < kNumCategories; ++c) t.labels[c] = (bits >> c) & 1;
    data.push_back(t);
  }
  auto dist = label_distribution(data);
  EXPECT_EQ(dist[0].positives, 3u);
  EXPECT_EQ(dist[0].negatives, 1u);
  EXPECT_DOUBLE_EQ(dist[0].fraction, 0.75);
  EXPECT_EQ(dist[1].positives, 1u);
  EXPECT_EQ(dist[2].positives, 0u);
  EXPECT_EQ(dist[3].positives, 0u);
  EXPECT_THROW(label_distribution({}), InvalidArgument);
}

TEST(Labels, LoadJoinAndCategoryExtraction) {
  namespace fs = std::filesystem;
  fs::path tmp = fs::temp_directory_path() / "edtweetlab_labels_test.csv";
  write_file_atomic(tmp, "id,cat1,cat2,cat3,cat4\nt1,1,0,0,1\nt2,0,0,1,0\n");
  auto labels = load_labels(tmp);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels.at("t1")[0], 1);
  EXPECT_EQ(labels.at("t1")[3], 1);

  JoinResult join = join_labels({ct("t1", {"a"}), ct("t9", {"b"}), ct("t2", {"c"})}, labels);
  ASSERT_EQ(join.data.size(), 2u);
  EXPECT_EQ(join.unlabeled, 1u);
  EXPECT_EQ(join.data[0].tweet.id, "t1");
  EXPECT_EQ(join.data[1].tweet.id, "t2");

  auto y1 = labels_for_category(join.data, 1);
  EXPECT_EQ(y1, (std::vector<int>{1, 0}));
  auto y3 = labels_for_category(join.data, 3);
  EXPECT_EQ(y3, (std::vector<int>{0, 1}));
  EXPECT_THROW(labels_for_category(join.data, 0), InvalidArgument);
  EXPECT_THROW(labels_for_category(join.data, 5), InvalidArgument);

  write_file_atomic(tmp, "t1,1,0,0,1\nt1,0,0,0,0\n");
  EXPECT_THROW(load_labels(tmp), FormatError);
  write_file_atomic(tmp, "t1,2,0,0,1\n");
  EXPECT_THROW(load_labels(tmp), FormatError);
  write_file_atomic(tmp, "t1,1,0\n");
  EXPECT_THROW(load_labels(tmp), FormatError);
  fs::remove(tmp);
}
