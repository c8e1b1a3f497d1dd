#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "edtweetlab/corpus.hpp"
#include "edtweetlab/textprep.hpp"
#include "edtweetlab/util.hpp"

using namespace edtweetlab;

namespace {

std::filesystem::path data_dir() {
  const char* p = std::getenv("EDTWEETLAB_DATA");
  return p ? std::filesystem::path(p) : std::filesystem::path("data");
}

// reference implementation, full quadratic table
std::size_t lev_naive(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[a.size()][b.size()];
}

double sim_naive(const std::string& a, const std::string& b) {
  if (a.empty() && b.empty()) return 1.0;
  return 1.0 - static_cast<double>(lev_naive(a, b)) /
                   static_cast<double>(std::max(a.size(), b.size()));
}

std::string random_string(Rng& rng, std::size_t max_len, const char* alphabet = "ab c") {
  std::size_t n = rng.index(max_len + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.index(4)];
  return s;
}

}  // namespace

TEST(Tokenize, RuleApplication) {
  EXPECT_EQ(tokenize("#COVID19 is hard"), (std::vector<std::string>{"covid19", "is", "hard"}));
  EXPECT_EQ(tokenize("Binge!! https://t.co/x"), (std::vector<std::string>{"binge"}));
  EXPECT_EQ(tokenize(""), (std::vector<std::string>{}));
  EXPECT_EQ(tokenize("@User check HTTP://a.b #Fit2020!"),
            (std::vector<std::string>{"user", "check", "fit2020"}));
  EXPECT_EQ(tokenize("don't stop-me now..."), (std::vector<std::string>{"dont", "stopme", "now"}));
  EXPECT_EQ(tokenize("#### @@ !!!"), (std::vector<std::string>{}));
}

TEST(Tokenize, JoinIsIdempotent) {
  Rng rng(11);
  const char* alpha = "aB #@1.";
  for (int iter = 0; iter < 200; ++iter) {
    std::string text;
    std::size_t n = rng.index(40);
    for (std::size_t i = 0; i < n; ++i) text += alpha[rng.index(7)];
    auto once = tokenize(text);
    auto twice = tokenize(join_tokens(once));
    EXPECT_EQ(once, twice) << "input: " << text;
  }
}

TEST(Stopwords, OrderPreservingFilter) {
  std::vector<std::string> stop{"the", "do", "not"};
  EXPECT_EQ(remove_stopwords({"the", "eat"}, stop), (std::vector<std::string>{"eat"}));
  EXPECT_EQ(remove_stopwords({}, stop), (std::vector<std::string>{}));
}

TEST(Stopwords, ShippedListKeepsContentWords) {
  auto stop = load_stopwords(data_dir() / "stopwords_en_v1.txt");
  EXPECT_EQ(remove_stopwords({"people", "do", "not", "eat"}, stop),
            (std::vector<std::string>{"people", "eat"}));
}

TEST(Similarity, HandCases) {
  EXPECT_DOUBLE_EQ(similarity("same", "same"), 1.0);
  EXPECT_NEAR(similarity("abc", "abd"), 1.0 - 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(similarity("aaaa", "bbbb"), 0.0);
  EXPECT_DOUBLE_EQ(similarity("", ""), 1.0);
  EXPECT_DOUBLE_EQ(similarity("", "xyz"), 0.0);
}

TEST(Similarity, MatchesNaiveReferenceAndIsSymmetric) {
  Rng rng(5);
  for (int iter = 0; iter < 300; ++iter) {
    std::string a = random_string(rng, 18);
    std::string b = random_string(rng, 18);
    double s = similarity(a, b);
    EXPECT_NEAR(s, sim_naive(a, b), 1e-15);
    EXPECT_DOUBLE_EQ(s, similarity(b, a));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    if (s == 1.0) {
      EXPECT_EQ(a, b);
    }
  }
}

namespace {

CleanTweet ct(std::string id, std::vector<std::string> tokens) {
  return make_clean_tweet(std::move(id), std::move(tokens));
}

}  // namespace

TEST(Dedup, StrictThresholdBoundary) {
  // normalized texts of length 10 with edit distance 2 -> similarity exactly 0.80
  CleanTweet a = ct("a", {"aaaaaaaaaa"});
  CleanTweet b = ct("b", {"aaaaaaaabb"});
  ASSERT_DOUBLE_EQ(similarity(a.normalized_text, b.normalized_text), 0.8);
  DedupResult r = dedup_by_similarity({a, b}, DedupConfig{});
  EXPECT_EQ(r.kept.size(), 2u);
  EXPECT_TRUE(r.removed.empty());

  // distance 1 over length 10 -> 0.9, strictly above
  CleanTweet c = ct("c", {"aaaaaaaaab"});
  r = dedup_by_similarity({a, c}, DedupConfig{});
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].id, "a");
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].removed_id, "c");
  EXPECT_EQ(r.removed[0].kept_id, "a");
  EXPECT_NEAR(r.removed[0].score, 0.9, 1e-12);
}

TEST(Dedup, TrailingHashtagVariantRemoved) {
  CleanTweet a = ct("orig", tokenize("I am never eating sugar again friends #health"));
  CleanTweet b = ct("copy", tokenize("I am never eating sugar again friends #fitness"));
  double s = similarity(a.normalized_text, b.normalized_text);
  ASSERT_GT(s, 0.8);
  DedupResult r = dedup_by_similarity({a, b}, DedupConfig{});
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].id, "orig");
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].removed_id, "copy");
  EXPECT_DOUBLE_EQ(r.removed[0].score, s);
}

TEST(Dedup, GreedyMatchesNaiveScanOnRandomCorpora) {
  Rng rng(99);
  for (int iter = 0; iter < 30; ++iter) {
    std::vector<CleanTweet> tweets;
    for (int i = 0; i < 40; ++i) {
      std::string tok = random_string(rng, 12, "abcd");
      if (tok.empty()) tok = "a";
      // occasionally duplicate an earlier tweet with a small mutation
      if (i > 0 && rng.uniform01() < 0.3) {
        std::string base = tweets[rng.index(tweets.size())].normalized_text;
        if (!base.empty()) base[rng.index(base.size())] = 'z';
        tok = base.empty() ? tok : base;
      }
      tweets.push_back(ct("id" + std::to_string(i), {tok}));
    }
    DedupResult fast = dedup_by_similarity(tweets, DedupConfig{});

    // naive greedy scan with the plain similarity definition
    std::vector<CleanTweet> kept;
    std::vector<std::string> removed_ids;
    for (const CleanTweet& t : tweets) {
      bool dup = false;
      for (const CleanTweet& k : kept) {
        if (sim_naive(k.normalized_text, t.normalized_text) > 0.8) {
          dup = true;
          break;
        }
      }
      if (dup) {
        removed_ids.push_back(t.id);
      } else {
        kept.push_back(t);
      }
    }
    ASSERT_EQ(fast.kept.size(), kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) EXPECT_EQ(fast.kept[i].id, kept[i].id);
    ASSERT_EQ(fast.removed.size(), removed_ids.size());
    for (std::size_t i = 0; i < removed_ids.size(); ++i) {
      EXPECT_EQ(fast.removed[i].removed_id, removed_ids[i]);
    }
  }
}

TEST(Dedup, KeptSetHasNoPairAboveThreshold) {
  Rng rng(123);
  std::vector<CleanTweet> tweets;
  for (int i = 0; i < 60; ++i) {
    tweets.push_back(ct("k" + std::to_string(i), {random_string(rng, 10, "abc ") + "x"}));
  }
  DedupResult r = dedup_by_similarity(tweets, DedupConfig{});
  for (std::size_t i = 0; i < r.kept.size(); ++i) {
    for (std::size_t j = i + 1; j < r.kept.size(); ++j) {
      EXPECT_LE(similarity(r.kept[i].normalized_text, r.kept[j].normalized_text), 0.8);
    }
  }
  EXPECT_EQ(r.kept.size() + r.removed.size(), tweets.size());
}

TEST(Dedup, DeterministicAndValidatesThreshold) {
  std::vector<CleanTweet> tweets{ct("a", {"hello", "world"}), ct("b", {"hello", "word"})};
  DedupResult r1 = dedup_by_similarity(tweets, DedupConfig{});
  DedupResult r2 = dedup_by_similarity(tweets, DedupConfig{});
  ASSERT_EQ(r1.kept.size(), r2.kept.size());
  for (std::size_t i = 0; i < r1.kept.size(); ++i) EXPECT_EQ(r1.kept[i].id, r2.kept[i].id);

  DedupConfig bad;
  bad.threshold = 1.5;
  EXPECT_THROW(dedup_by_similarity(tweets, bad), InvalidArgument);
  bad.threshold = -0.1;
  EXPECT_THROW(dedup_by_similarity(tweets, bad), InvalidArgument);

  DedupConfig one;
  one.threshold = 1.0;  // nothing is strictly above it
  EXPECT_TRUE(dedup_by_similarity(tweets, one).removed.empty());
}

TEST(CleanTsv, RoundTrip) {
  std::vector<CleanTweet> tweets{ct("a1", {"eat", "well"}), ct("a2", {})};
  std::filesystem::path tmp =
      std::filesystem::temp_directory_path() / "edtweetlab_clean_roundtrip.tsv";
  write_file_atomic(tmp, clean_to_tsv(tweets));
  auto back = load_clean_tsv(tmp);
  std::filesystem::remove(tmp);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, "a1");
  EXPECT_EQ(back[0].tokens, (std::vector<std::string>{"eat", "well"}));
  EXPECT_EQ(back[0].normalized_text, "eat well");
  EXPECT_EQ(back[1].id, "a2");
  EXPECT_TRUE(back[1].tokens.empty());
}

TEST(RemovalLog, CsvFormat) {
  DedupResult::Removal rm;
  rm.removed_id = "b";
  rm.kept_id = "a";
  rm.score = 0.9;
  EXPECT_EQ(removals_to_csv({rm}), "removed_id,kept_id,score\nb,a,0.900000\n");
  EXPECT_EQ(removals_to_csv({}), "removed_id,kept_id,score\n");
}
