#ifndef EDTWEETLAB_EVAL_HPP_
#define EDTWEETLAB_EVAL_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "edtweetlab/util.hpp"
#include "edtweetlab/version.hpp"

namespace edtweetlab {

// --- splits ------------------------------------------------------------------

template <typename Id>
struct SplitPlan {
  std::vector<Id> train_ids;
  std::vector<Id> test_ids;
  double test_fraction = 0.0;
  std::uint64_t seed = 0;
};

// Seeded shuffle split. The test part is the first round(n * fraction)
// elements of the shuffled order, clamped so both parts stay non-empty.
template <typename Id>
SplitPlan<Id> split(const std::vector<Id>& ids, double test_fraction, std::uint64_t seed) {
  if (ids.size() < 2) throw InvalidArgument("split: need at least 2 elements");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("split: test fraction must lie in (0, 1)");
  }
  std::vector<Id> shuffled = ids;
  Rng rng(seed);
  rng.shuffle(shuffled);
  std::size_t n = shuffled.size();
  std::size_t n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::min(std::max<std::size_t>(n_test, 1), n - 1);
  SplitPlan<Id> plan;
  plan.test_fraction = test_fraction;
  plan.seed = seed;
  plan.test_ids.assign(shuffled.begin(), shuffled.begin() + n_test);
  plan.train_ids.assign(shuffled.begin() + n_test, shuffled.end());
  return plan;
}

// Seeded shuffle, then consecutive chunks; the first n % k folds get one
// extra element. Folds partition the input.
template <typename Id>
std::vector<std::vector<Id>> kfold(const std::vector<Id>& ids, std::size_t k,
                                   std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("kfold: k must be at least 2");
  if (k > ids.size()) throw InvalidArgument("kfold: k exceeds element count");
  std::vector<Id> shuffled = ids;
  Rng rng(seed);
  rng.shuffle(shuffled);
  std::vector<std::vector<Id>> folds(k);
  std::size_t base = ids.size() / k, extra = ids.size() % k, pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t len = base + (f < extra ? 1 : 0);
    folds[f].assign(shuffled.begin() + pos, shuffled.begin() + pos + len);
    pos += len;
  }
  return folds;
}

// Stratified variant of split(): each class is shuffled and cut separately so
// the test part preserves class balance; parts are then order-shuffled once
// more for good measure.
template <typename Id>
SplitPlan<Id> stratified_split(const std::vector<Id>& ids, const std::vector<int>& labels,
                               double test_fraction, std::uint64_t seed) {
  if (ids.size() != labels.size()) throw InvalidArgument("stratified_split: size mismatch");
  if (ids.size() < 2) throw InvalidArgument("stratified_split: need at least 2 elements");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("stratified_split: test fraction must lie in (0, 1)");
  }
  std::vector<Id> pos_ids, neg_ids;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    (labels[i] ? pos_ids : neg_ids).push_back(ids[i]);
  }
  SplitPlan<Id> plan;
  plan.test_fraction = test_fraction;
  plan.seed = seed;
  Rng rng(derive_seed(seed, "stratified"));
  for (std::vector<Id>* part : {&pos_ids, &neg_ids}) {
    if (part->empty()) continue;
    rng.shuffle(*part);
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(part->size()) * test_fraction));
    n_test = std::min(n_test, part->size());
    plan.test_ids.insert(plan.test_ids.end(), part->begin(), part->begin() + n_test);
    plan.train_ids.insert(plan.train_ids.end(), part->begin() + n_test, part->end());
  }
  if (plan.test_ids.empty() || plan.train_ids.empty()) {
    std::vector<Id> all = ids;
    return split(all, test_fraction, seed);
  }
  rng.shuffle(plan.train_ids);
  rng.shuffle(plan.test_ids);
  return plan;
}

// --- metrics -----------------------------------------------------------------

struct BinaryMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Positive class is 1. Degenerate denominators yield 0 for the affected
// metric instead of NaN.
inline BinaryMetrics metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) throw InvalidArgument("metrics: length mismatch");
  if (y_true.empty()) throw InvalidArgument("metrics: empty input");
  BinaryMetrics m;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    int t = y_true[i], p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) {
      throw InvalidArgument("metrics: labels must be 0 or 1");
    }
    if (t == 1 && p == 1) ++m.tp;
    if (t == 0 && p == 1) ++m.fp;
    if (t == 0 && p == 0) ++m.tn;
    if (t == 1 && p == 0) ++m.fn;
  }
  double n = static_cast<double>(y_true.size());
  m.accuracy = static_cast<double>(m.tp + m.tn) / n;
  m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

// --- repeated runs -------------------------------------------------------

struct RunStats {
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<BinaryMetrics> per_run;
};

// Executes `run` with seeds base_seed .. base_seed + n_runs - 1 and reports
// mean and population standard deviation of F1 and accuracy.
inline RunStats repeated_runs(const std::function<BinaryMetrics(std::uint64_t)>& run,
                              std::size_t n_runs, std::uint64_t base_seed) {
  if (n_runs == 0) throw InvalidArgument("repeated_runs: need at least one run");
  RunStats stats;
  for (std::size_t i = 0; i < n_runs; ++i) {
    stats.per_run.push_back(run(base_seed + i));
  }
  double n = static_cast<double>(n_runs);
  for (const BinaryMetrics& m : stats.per_run) {
    stats.mean_f1 += m.f1 / n;
    stats.mean_accuracy += m.accuracy / n;
  }
  for (const BinaryMetrics& m : stats.per_run) {
    stats.std_f1 += (m.f1 - stats.mean_f1) * (m.f1 - stats.mean_f1) / n;
    stats.std_accuracy += (m.accuracy - stats.mean_accuracy) * (m.accuracy - stats.mean_accuracy) / n;
  }
  stats.std_f1 = std::sqrt(stats.std_f1);
  stats.std_accuracy = std::sqrt(stats.std_accuracy);
  return stats;
}

inline double benchmark(const std::function<void()>& job) {
  auto start = std::chrono::steady_clock::now();
  job();
  auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(end - start).count();
}

// --- report --------------------------------------------------------------

inline const std::vector<std::string>& model_order() {
  static const std::vector<std::string> order{"forest", "rnn", "bilstm", "transformer"};
  return order;
}

inline int model_rank(const std::string& model) {
  const auto& order = model_order();
  auto it = std::find(order.begin(), order.end(), model);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

struct EvalCell {
  std::string model;
  int category = 0;
  double f1_pct = 0.0;
  double accuracy_pct = 0.0;
  double std_f1 = 0.0;       // percentage points
  double std_acc = 0.0;      // percentage points
  double wall_clock_s = 0.0;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<EvalCell> cells;
  std::uint64_t seed = 0;
  std::string dataset_hash;
  std::string config_text;  // flattened key = value snapshot
};

enum class ReportFormat { kCsv, kMarkdown };

inline std::vector<EvalCell> sorted_cells(const EvalReport& report) {
  std::vector<EvalCell> cells = report.cells;
  std::stable_sort(cells.begin(), cells.end(), [](const EvalCell& a, const EvalCell& b) {
    int ra = model_rank(a.model), rb = model_rank(b.model);
    if (ra != rb) return ra < rb;
    if (a.model != b.model) return a.model < b.model;
    return a.category < b.category;
  });
  return cells;
}

inline constexpr const char* kReportCsvHeader =
    "model,category,f1_pct,accuracy_pct,std_f1,std_acc,wall_clock_s,seed";

inline std::string format_cell_csv(const EvalCell& c) {
  std::string out = c.model;
  out += ',';
  out += std::to_string(c.category);
  out += ',';
  out += format_fixed(c.f1_pct, 1);
  out += ',';
  out += format_fixed(c.accuracy_pct, 1);
  out += ',';
  out += format_fixed(c.std_f1, 2);
  out += ',';
  out += format_fixed(c.std_acc, 2);
  out += ',';
  out += format_fixed(c.wall_clock_s, 3);
  out += ',';
  out += std::to_string(c.seed);
  return out;
}

// CSV: fixed header, one row per (model, category), ordered by model rank
// then category. Scores are percentages with one decimal, deviations two,
// wall clock three.
inline std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::vector<EvalCell> cells = sorted_cells(report);
  if (format == ReportFormat::kCsv) {
    std::string out = kReportCsvHeader;
    out += '\n';
    for (const EvalCell& c : cells) {
      out += format_cell_csv(c);
      out += '\n';
    }
    return out;
  }
  std::vector<std::string> models;
  std::vector<int> categories;
  for (const EvalCell& c : cells) {
    if (std::find(models.begin(), models.end(), c.model) == models.end()) {
      models.push_back(c.model);
    }
    if (std::find(categories.begin(), categories.end(), c.category) == categories.end()) {
      categories.push_back(c.category);
    }
  }
  std::sort(categories.begin(), categories.end());
  auto cell_of = [&](const std::string& model, int category) -> const EvalCell* {
    for (const EvalCell& c : cells) {
      if (c.model == model && c.category == category) return &c;
    }
    return nullptr;
  };

  std::string out = "# Evaluation report\n\n";
  out += "- tool: edtweetlab ";
  out += kVersion;
  out += "\n- seed: ";
  out += std::to_string(report.seed);
  if (!report.dataset_hash.empty()) {
    out += "\n- dataset_hash: ";
    out += report.dataset_hash;
  }
  out += "\n\n## Classification performance\n\n| model |";
  for (int cat : categories) {
    out += " cat" + std::to_string(cat) + " F1 % | cat" + std::to_string(cat) + " acc % |";
  }
  out += "\n|---|";
  for (std::size_t i = 0; i < categories.size(); ++i) out += "---|---|";
  out += '\n';
  for (const std::string& model : models) {
    out += "| " + model + " |";
    for (int cat : categories) {
      const EvalCell* c = cell_of(model, cat);
      out += c ? " " + format_fixed(c->f1_pct, 1) + " | " + format_fixed(c->accuracy_pct, 1) + " |"
               : " - | - |";
    }
    out += '\n';
  }
  out += "\n## Implementation time\n\n| model |";
  for (int cat : categories) out += " cat" + std::to_string(cat) + " (s) |";
  out += "\n|---|";
  for (std::size_t i = 0; i < categories.size(); ++i) out += "---|";
  out += '\n';
  for (const std::string& model : models) {
    out += "| " + model + " |";
    for (int cat : categories) {
      const EvalCell* c = cell_of(model, cat);
      out += c ? " " + format_fixed(c->wall_clock_s, 3) + " |" : " - |";
    }
    out += '\n';
  }
  if (!report.config_text.empty()) {
    out += "\n## Configuration\n\n```\n";
    out += report.config_text;
    if (report.config_text.back() != '\n') out += '\n';
    out += "```\n";
  }
  return out;
}

// Reads back the CSV form. Only the cells are recovered; report metadata
// lives in the run manifest.
inline EvalReport parse_report_csv(const std::string& text) {
  EvalReport report;
  std::vector<std::string> lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != kReportCsvHeader) {
    throw FormatError("report csv: missing or unexpected header");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    std::vector<std::string> f = split(lines[i], ',');
    if (f.size() != 8) {
      throw FormatError("report csv: line " + std::to_string(i + 1) + ": expected 8 fields");
    }
    EvalCell c;
    c.model = trim(f[0]);
    try {
      c.category = std::stoi(f[1]);
      c.f1_pct = std::stod(f[2]);
      c.accuracy_pct = std::stod(f[3]);
      c.std_f1 = std::stod(f[4]);
      c.std_acc = std::stod(f[5]);
      c.wall_clock_s = std::stod(f[6]);
      c.seed = std::stoull(f[7]);
    } catch (const std::exception&) {
      throw FormatError("report csv: line " + std::to_string(i + 1) + ": bad number");
    }
    report.cells.push_back(std::move(c));
  }
  if (!report.cells.empty()) report.seed = report.cells[0].seed;
  return report;
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_EVAL_HPP_
