#ifndef EDTWEETLAB_TEXTPREP_HPP_
#define EDTWEETLAB_TEXTPREP_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "edtweetlab/corpus.hpp"
#include "edtweetlab/util.hpp"

namespace edtweetlab {

struct CleanTweet {
  std::string id;
  std::vector<std::string> tokens;
  std::string normalized_text;  // tokens joined by single spaces
};

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

inline CleanTweet make_clean_tweet(std::string id, std::vector<std::string> tokens) {
  CleanTweet t;
  t.id = std::move(id);
  t.normalized_text = join_tokens(tokens);
  t.tokens = std::move(tokens);
  return t;
}

// Whitespace split, then per token: URLs dropped, leading '#'/'@' stripped,
// ASCII-lowercased, every remaining non-alphanumeric byte removed. Tokens
// that end up empty are dropped.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ascii_space(text[j])) ++j;
    if (j > i) {
      std::string_view word = text.substr(i, j - i);
      if (!starts_with_nocase(word, "http://") && !starts_with_nocase(word, "https://")) {
        while (!word.empty() && (word.front() == '#' || word.front() == '@')) {
          word.remove_prefix(1);
        }
        std::string tok;
        tok.reserve(word.size());
        for (char c : word) {
          char l = ascii_lower(c);
          if ((l >= 'a' && l <= 'z') || (l >= '0' && l <= '9')) tok.push_back(l);
        }
        if (!tok.empty()) out.push_back(std::move(tok));
      }
    }
    i = j;
  }
  return out;
}

inline std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                                 const std::vector<std::string>& stop_list) {
  std::unordered_set<std::string> stop(stop_list.begin(), stop_list.end());
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) {
    if (!stop.count(t)) out.push_back(t);
  }
  return out;
}

namespace detail {

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      std::size_t cost = (a[i - 1] == b[j - 1]) ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

// True when levenshtein(a, b) >= limit. Aborts the DP as soon as a whole row
// sits at or above the limit, which makes the all-pairs scan cheap on
// dissimilar texts.
inline bool distance_at_least(std::string_view a, std::string_view b, std::size_t limit) {
  if (a.size() < b.size()) std::swap(a, b);
  if (a.size() - b.size() >= limit) return true;
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    std::size_t row_min = row[0];
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      std::size_t cost = (a[i - 1] == b[j - 1]) ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = up;
      row_min = std::min(row_min, row[j]);
    }
    if (row_min >= limit) return true;
  }
  return row[b.size()] >= limit;
}

}  // namespace detail

// Normalized character-level similarity: 1 - levenshtein(a, b) / max(|a|, |b|).
// Two empty strings are identical (1.0).
inline double similarity(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t m = std::max(a.size(), b.size());
  return 1.0 - static_cast<double>(detail::levenshtein(a, b)) / static_cast<double>(m);
}

struct DedupConfig {
  double threshold = 0.8;  // remove when similarity is strictly above this
};

struct DedupResult {
  std::vector<CleanTweet> kept;
  struct Removal {
    std::string removed_id;
    std::string kept_id;
    double score;
  };
  std::vector<Removal> removed;
};

namespace detail {

// Smallest distance d for which similarity(d, m) fails "sim > threshold",
// evaluated with the same double expression as similarity() so the fast path
// and the naive path can never disagree.
inline std::size_t dedup_distance_limit(std::size_t m, double threshold) {
  std::size_t lo = 0, hi = m + 1;
  auto above = [&](std::size_t d) {
    double sim = 1.0 - static_cast<double>(d) / static_cast<double>(m);
    return sim > threshold;
  };
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (above(mid)) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace detail

// Greedy forward scan over the input order: a tweet is removed when its
// normalized text is more than `threshold`-similar to any already-kept tweet
// (the first such tweet is logged as the keeper). Input order is preserved.
inline DedupResult dedup_by_similarity(const std::vector<CleanTweet>& tweets,
                                       const DedupConfig& config = {}) {
  if (config.threshold < 0.0 || config.threshold > 1.0) {
    throw InvalidArgument("similarity threshold must lie in [0, 1]");
  }
  DedupResult result;
  for (const CleanTweet& t : tweets) {
    const CleanTweet* keeper = nullptr;
    for (const CleanTweet& k : result.kept) {
      const std::string& a = t.normalized_text;
      const std::string& b = k.normalized_text;
      if (a.empty() && b.empty()) {
        if (1.0 > config.threshold) {
          keeper = &k;
          break;
        }
        continue;
      }
      std::size_t m = std::max(a.size(), b.size());
      std::size_t limit = detail::dedup_distance_limit(m, config.threshold);
      if (limit == 0) continue;  // threshold >= 1: nothing is strictly above it
      if (!detail::distance_at_least(a, b, limit)) {
        keeper = &k;
        break;
      }
    }
    if (keeper) {
      result.removed.push_back({t.id, keeper->id, similarity(t.normalized_text,
                                                             keeper->normalized_text)});
    } else {
      result.kept.push_back(t);
    }
  }
  return result;
}

// --- file formats ----------------------------------------------------------

inline std::string clean_to_tsv(const std::vector<CleanTweet>& tweets) {
  std::string out;
  for (const CleanTweet& t : tweets) {
    out += t.id;
    out += '\t';
    out += t.normalized_text;
    out += '\n';
  }
  return out;
}

inline std::vector<CleanTweet> load_clean_tsv(const std::filesystem::path& path) {
  std::string content = read_file(path);
  std::vector<CleanTweet> out;
  std::size_t lineno = 0;
  for (const std::string& line : split(content, '\n')) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 2 || trim(fields[0]).empty()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'id<TAB>text'");
    }
    std::vector<std::string> tokens = split_nonempty(fields[1], ' ');
    out.push_back(make_clean_tweet(trim(fields[0]), std::move(tokens)));
  }
  return out;
}

inline std::string removals_to_csv(const std::vector<DedupResult::Removal>& removals) {
  std::string out = "removed_id,kept_id,score\n";
  for (const auto& r : removals) {
    out += r.removed_id;
    out += ',';
    out += r.kept_id;
    out += ',';
    out += format_fixed(r.score, 6);
    out += '\n';
  }
  return out;
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_TEXTPREP_HPP_
