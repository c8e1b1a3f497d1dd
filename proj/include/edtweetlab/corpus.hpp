#ifndef EDTWEETLAB_CORPUS_HPP_
#define EDTWEETLAB_CORPUS_HPP_

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "edtweetlab/util.hpp"

namespace edtweetlab {

// One record of a tweet archive. Archives are tab-separated, one record per
// line, six columns: id, RFC 3339 timestamp, author, text, retweet flag
// ("0" | "1" | "-" for missing), language hint (BCP-47-ish token or "-").
struct RawTweet {
  std::string id;
  std::string timestamp;            // original text, preserved for round-trips
  std::int64_t timestamp_micros = 0;
  std::string author;
  std::string text;                 // sanitized, non-empty
  bool is_retweet = false;
  std::string lang_hint;            // lowercased; empty when the column was "-"
  int source_set = 0;               // 1..3, or 0 when unknown
};

struct Corpus {
  std::vector<RawTweet> tweets;
  std::vector<std::string> provenance;  // source archive names, ingestion order

  std::size_t size() const { return tweets.size(); }
};

// The three keyword groups used to capture the stream, in their declared
// order. Matching is case-insensitive substring search.
struct KeywordSets {
  std::vector<std::string> set1;
  std::vector<std::string> set2;
  std::vector<std::string> set3;

  static KeywordSets defaults() {
    KeywordSets k;
    k.set1 = {"anorexia",       "anorexic",    "dietary disorders", "inappetence",
              "feeding disorder", "food problem", "binge eating",      "anorectic"};
    k.set2 = {"eating disorders",        "bulimia",
              "food issues",             "loss of appetite",
              "food issue",              "food hater",
              "eat healthier",           "disturbed eating habits",
              "abnormal eating habits",  "abnormal eating habit"};
    k.set3 = {"binge-vomit syndrome", "bingeing", "bulimarexia", "anorexic skinny",
              "eating healthy"};
    return k;
  }

  const std::vector<std::string>& by_index(int set) const {
    switch (set) {
      case 1: return set1;
      case 2: return set2;
      case 3: return set3;
      default: throw InvalidArgument("keyword set index must be 1, 2 or 3");
    }
  }
};

// Collapses runs of whitespace and control characters into single spaces and
// trims the ends, so no field can smuggle a tab or newline into the TSV.
inline std::string sanitize_field(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  bool pending_space = false;
  for (unsigned char c : field) {
    if (is_ascii_space(static_cast<char>(c)) || c < 0x20 || c == 0x7f) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

struct ParseResult {
  Corpus corpus;
  std::size_t lines = 0;      // non-empty lines seen
  std::size_t malformed = 0;  // lines skipped
};

namespace detail {

inline std::optional<RawTweet> parse_record(std::string_view line, int source_set) {
  std::vector<std::string> fields = split(line, '\t');
  if (fields.size() != 6) return std::nullopt;
  RawTweet t;
  t.id = sanitize_field(fields[0]);
  t.timestamp = trim(fields[1]);
  t.author = sanitize_field(fields[2]);
  t.text = sanitize_field(fields[3]);
  t.source_set = source_set;
  if (t.id.empty() || t.text.empty()) return std::nullopt;
  auto micros = parse_rfc3339_micros(t.timestamp);
  if (!micros) return std::nullopt;
  t.timestamp_micros = *micros;
  std::string flag = trim(fields[4]);
  if (flag == "0") {
    t.is_retweet = false;
  } else if (flag == "1") {
    t.is_retweet = true;
  } else if (flag == "-") {
    t.is_retweet = starts_with_nocase(t.text, "rt @");
  } else {
    return std::nullopt;
  }
  std::string lang = trim(fields[5]);
  t.lang_hint = (lang == "-") ? std::string() : to_lower(lang);
  return t;
}

}  // namespace detail

// Reads one archive. Malformed lines are skipped and counted; when more than
// half of the non-empty lines are malformed the whole archive is rejected.
inline ParseResult parse_archive(std::istream& in, int source_set,
                                 const std::string& provenance = "") {
  if (!in) throw IngestError("unreadable archive stream: " + provenance);
  ParseResult result;
  if (!provenance.empty()) result.corpus.provenance.push_back(provenance);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++result.lines;
    auto tweet = detail::parse_record(line, source_set);
    if (tweet) {
      result.corpus.tweets.push_back(std::move(*tweet));
    } else {
      ++result.malformed;
    }
  }
  if (in.bad()) throw IngestError("read failure on archive stream: " + provenance);
  if (result.lines > 0 && result.malformed * 2 > result.lines) {
    throw FormatError("archive " + provenance + ": " + std::to_string(result.malformed) +
                      " of " + std::to_string(result.lines) + " lines malformed");
  }
  return result;
}

namespace detail {

// Indices of the records that survive retweet removal and id/text
// deduplication, ordered by (timestamp, ingestion order). Shared by
// merge_and_dedup and corpus_stats so the two can never disagree.
struct MergePlan {
  std::vector<std::size_t> order;       // all records, sorted
  std::vector<std::size_t> no_retweet;  // after retweet removal
  std::vector<std::size_t> kept;        // after id/text dedup
};

inline MergePlan merge_plan(const std::vector<const Corpus*>& parts) {
  MergePlan plan;
  std::vector<const RawTweet*> all;
  for (const Corpus* c : parts) {
    for (const RawTweet& t : c->tweets) all.push_back(&t);
  }
  plan.order.resize(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) plan.order[i] = i;
  std::stable_sort(plan.order.begin(), plan.order.end(), [&](std::size_t a, std::size_t b) {
    return all[a]->timestamp_micros < all[b]->timestamp_micros;
  });
  std::unordered_set<std::string> seen_ids, seen_texts;
  for (std::size_t idx : plan.order) {
    if (all[idx]->is_retweet) continue;
    plan.no_retweet.push_back(idx);
    if (seen_ids.count(all[idx]->id) || seen_texts.count(all[idx]->text)) continue;
    seen_ids.insert(all[idx]->id);
    seen_texts.insert(all[idx]->text);
    plan.kept.push_back(idx);
  }
  return plan;
}

inline std::vector<const Corpus*> corpus_ptrs(const std::vector<Corpus>& parts) {
  std::vector<const Corpus*> ptrs;
  ptrs.reserve(parts.size());
  for (const Corpus& c : parts) ptrs.push_back(&c);
  return ptrs;
}

inline const RawTweet& record_at(const std::vector<const Corpus*>& parts, std::size_t flat) {
  for (const Corpus* c : parts) {
    if (flat < c->tweets.size()) return c->tweets[flat];
    flat -= c->tweets.size();
  }
  throw InvalidArgument("record index out of range");
}

}  // namespace detail

// Merges archives into one corpus: drops retweets, then removes records that
// repeat an already-seen id or byte-identical text, keeping the earliest by
// (timestamp, ingestion order). Result is sorted by that same key.
inline Corpus merge_and_dedup(const std::vector<Corpus>& parts) {
  auto ptrs = detail::corpus_ptrs(parts);
  detail::MergePlan plan = detail::merge_plan(ptrs);
  Corpus out;
  out.tweets.reserve(plan.kept.size());
  for (std::size_t idx : plan.kept) out.tweets.push_back(detail::record_at(ptrs, idx));
  for (const Corpus& c : parts) {
    for (const std::string& p : c.provenance) {
      if (std::find(out.provenance.begin(), out.provenance.end(), p) == out.provenance.end()) {
        out.provenance.push_back(p);
      }
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string> rough_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    if (is_ascii_space(c)) {
      flush();
      continue;
    }
    char l = ascii_lower(c);
    if ((l >= 'a' && l <= 'z') || (l >= '0' && l <= '9')) cur.push_back(l);
  }
  flush();
  return tokens;
}

inline bool looks_english(const RawTweet& t,
                          const std::unordered_set<std::string>& top_stopwords) {
  if (!t.lang_hint.empty()) return t.lang_hint == "en";
  std::vector<std::string> tokens = rough_tokens(t.text);
  if (tokens.empty()) return false;
  std::size_t hits = 0;
  for (const std::string& tok : tokens) hits += top_stopwords.count(tok);
  return hits * 10 >= tokens.size();  // at least 10% stop-word hits
}

inline std::unordered_set<std::string> top_stopword_set(const std::vector<std::string>& stop_list) {
  if (stop_list.empty()) throw InvalidArgument("stop list must not be empty");
  std::unordered_set<std::string> top;
  for (std::size_t i = 0; i < stop_list.size() && i < 50; ++i) top.insert(stop_list[i]);
  return top;
}

}  // namespace detail

// Keeps tweets whose language hint is "en"; when the hint is missing, falls
// back to a stop-word heuristic: at least 10% of the rough word tokens must
// be among the first 50 entries of the (frequency-ordered) stop list.
inline Corpus filter_language(const Corpus& corpus, const std::vector<std::string>& stop_list) {
  auto top = detail::top_stopword_set(stop_list);
  Corpus out;
  out.provenance = corpus.provenance;
  for (const RawTweet& t : corpus.tweets) {
    if (detail::looks_english(t, top)) out.tweets.push_back(t);
  }
  return out;
}

// Phrases of `sets` found in `text` (case-insensitive substring), paired with
// the 1-based index of the keyword group, in declared order.
inline std::vector<std::pair<std::string, int>> keyword_match(std::string_view text,
                                                              const KeywordSets& sets) {
  std::string lower = to_lower(text);
  std::vector<std::pair<std::string, int>> out;
  for (int set = 1; set <= 3; ++set) {
    for (const std::string& phrase : sets.by_index(set)) {
      if (lower.find(to_lower(phrase)) != std::string::npos) out.emplace_back(phrase, set);
    }
  }
  return out;
}

// Counts at every record-level filter stage, computed without mutating the
// input. `after_language` is present only when a stop list is supplied.
struct CorpusStats {
  std::size_t raw = 0;
  std::size_t after_retweets = 0;
  std::size_t after_dedup = 0;
  std::optional<std::size_t> after_language;
  std::map<int, std::size_t> raw_by_set;
  std::size_t keyword_matched = 0;
};

inline CorpusStats corpus_stats(const std::vector<Corpus>& parts,
                                const std::vector<std::string>* stop_list = nullptr,
                                const KeywordSets* keywords = nullptr) {
  auto ptrs = detail::corpus_ptrs(parts);
  detail::MergePlan plan = detail::merge_plan(ptrs);
  CorpusStats stats;
  stats.raw = plan.order.size();
  stats.after_retweets = plan.no_retweet.size();
  stats.after_dedup = plan.kept.size();
  for (const Corpus* c : ptrs) {
    for (const RawTweet& t : c->tweets) ++stats.raw_by_set[t.source_set];
  }
  if (stop_list) {
    auto top = detail::top_stopword_set(*stop_list);
    std::size_t kept = 0;
    for (std::size_t idx : plan.kept) {
      if (detail::looks_english(detail::record_at(ptrs, idx), top)) ++kept;
    }
    stats.after_language = kept;
  }
  if (keywords) {
    for (std::size_t idx : plan.kept) {
      if (!keyword_match(detail::record_at(ptrs, idx).text, *keywords).empty()) {
        ++stats.keyword_matched;
      }
    }
  }
  return stats;
}

inline CorpusStats corpus_stats(const Corpus& corpus,
                                const std::vector<std::string>* stop_list = nullptr,
                                const KeywordSets* keywords = nullptr) {
  std::vector<Corpus> parts{corpus};
  return corpus_stats(parts, stop_list, keywords);
}

// --- TSV round-trip ------------------------------------------------------

inline std::string corpus_to_tsv(const Corpus& corpus) {
  std::string out;
  for (const RawTweet& t : corpus.tweets) {
    out += t.id;
    out += '\t';
    out += t.timestamp;
    out += '\t';
    out += t.author;
    out += '\t';
    out += t.text;
    out += '\t';
    out += t.is_retweet ? "1" : "0";
    out += '\t';
    out += t.lang_hint.empty() ? "-" : t.lang_hint;
    out += '\n';
  }
  return out;
}

// Reads a corpus TSV written by this tool or a raw archive from disk.
inline ParseResult load_archive_file(const std::filesystem::path& path, int source_set) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open archive: " + path.string());
  return parse_archive(in, source_set, path.filename().string());
}

// Stop-word file: one lowercase token per line, ordered by corpus frequency.
inline std::vector<std::string> load_stopwords(const std::filesystem::path& path) {
  std::string content = read_file(path);
  std::vector<std::string> words;
  for (const std::string& line : split(content, '\n')) {
    std::string w = trim(line);
    if (!w.empty()) words.push_back(to_lower(w));
  }
  if (words.empty()) throw FormatError("stop-word file is empty: " + path.string());
  return words;
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_CORPUS_HPP_
