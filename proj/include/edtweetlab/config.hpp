#ifndef EDTWEETLAB_CONFIG_HPP_
#define EDTWEETLAB_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "edtweetlab/util.hpp"
#include "edtweetlab/version.hpp"

namespace edtweetlab {

enum class ConfigType { kString, kU64, kDouble, kBool, kPath, kPathList, kStringList, kIntList };

struct ConfigEntry {
  const char* key;
  const char* default_value;
  ConfigType type;
  const char* doc;
};

// Every recognized key with its default. Paths are resolved relative to the
// config file. List values are comma separated.
inline const std::vector<ConfigEntry>& config_schema() {
  static const std::vector<ConfigEntry> entries{
      {"run.seed", "42", ConfigType::kU64, "master seed; every stage derives from it"},
      {"run.out_dir", "out", ConfigType::kPath, "directory for all pipeline outputs"},
      {"ingest.set1", "", ConfigType::kPathList, "archives captured with keyword group 1"},
      {"ingest.set2", "", ConfigType::kPathList, "archives captured with keyword group 2"},
      {"ingest.set3", "", ConfigType::kPathList, "archives captured with keyword group 3"},
      {"ingest.require_keyword", "false", ConfigType::kBool,
       "drop tweets that match no keyword phrase"},
      {"preprocess.stopwords", "", ConfigType::kPath, "stop-word file, one token per line"},
      {"preprocess.sim_threshold", "0.8", ConfigType::kDouble,
       "near-duplicate removal threshold (strictly above removes)"},
      {"labels.file", "", ConfigType::kPath, "label CSV: id,cat1,cat2,cat3,cat4"},
      {"stats.top_k", "10", ConfigType::kU64, "terms listed by the stats stage"},
      {"features.min_df", "1", ConfigType::kU64, "minimum document frequency for vocabulary"},
      {"forest.cat1.max_depth", "7", ConfigType::kU64, "tree depth limit, category 1"},
      {"forest.cat1.max_features", "log2", ConfigType::kString,
       "per-split feature subset rule, category 1"},
      {"forest.cat1.n_estimators", "200", ConfigType::kU64, "tree count, category 1"},
      {"forest.cat2.max_depth", "8", ConfigType::kU64, "tree depth limit, category 2"},
      {"forest.cat2.max_features", "auto", ConfigType::kString,
       "per-split feature subset rule, category 2"},
      {"forest.cat2.n_estimators", "1000", ConfigType::kU64, "tree count, category 2"},
      {"forest.cat3.max_depth", "8", ConfigType::kU64, "tree depth limit, category 3"},
      {"forest.cat3.max_features", "sqrt", ConfigType::kString,
       "per-split feature subset rule, category 3"},
      {"forest.cat3.n_estimators", "800", ConfigType::kU64, "tree count, category 3"},
      {"forest.cat4.max_depth", "8", ConfigType::kU64, "tree depth limit, category 4"},
      {"forest.cat4.max_features", "auto", ConfigType::kString,
       "per-split feature subset rule, category 4"},
      {"forest.cat4.n_estimators", "1000", ConfigType::kU64, "tree count, category 4"},
      {"rnn.embed_dim", "64", ConfigType::kU64, "embedding width (rnn)"},
      {"rnn.hidden_dim", "64", ConfigType::kU64, "hidden state width (rnn)"},
      {"rnn.max_len", "64", ConfigType::kU64, "sequence width (rnn)"},
      {"rnn.lr", "0.001", ConfigType::kDouble, "Adam learning rate (rnn)"},
      {"rnn.batch_size", "32", ConfigType::kU64, "minibatch size (rnn)"},
      {"rnn.epochs", "10", ConfigType::kU64, "training epochs (rnn)"},
      {"bilstm.embed_dim", "64", ConfigType::kU64, "embedding width (bilstm)"},
      {"bilstm.hidden_dim", "64", ConfigType::kU64, "hidden state width per direction (bilstm)"},
      {"bilstm.max_len", "64", ConfigType::kU64, "sequence width (bilstm)"},
      {"bilstm.lr", "0.001", ConfigType::kDouble, "Adam learning rate (bilstm)"},
      {"bilstm.batch_size", "32", ConfigType::kU64, "minibatch size (bilstm)"},
      {"bilstm.epochs", "10", ConfigType::kU64, "training epochs (bilstm)"},
      {"transformer.n_layers", "2", ConfigType::kU64, "encoder block count"},
      {"transformer.n_heads", "4", ConfigType::kU64, "attention heads per block"},
      {"transformer.d_model", "64", ConfigType::kU64, "model width"},
      {"transformer.ff_dim", "128", ConfigType::kU64, "feed-forward inner width"},
      {"transformer.max_len", "64", ConfigType::kU64, "sequence width incl. CLS slot"},
      {"transformer.lr", "0.001", ConfigType::kDouble, "Adam learning rate"},
      {"transformer.batch_size", "32", ConfigType::kU64, "minibatch size"},
      {"transformer.epochs", "30", ConfigType::kU64, "training epochs"},
      {"transformer.reference_protocol", "false", ConfigType::kBool,
       "pin lr=2e-05, batch_size=32, epochs=15"},
      {"eval.models", "forest,rnn,bilstm,transformer", ConfigType::kStringList,
       "model kinds for train/evaluate stages"},
      {"eval.categories", "1,2,3,4", ConfigType::kIntList, "categories for train/evaluate"},
      {"eval.folds", "5", ConfigType::kU64, "cross-validation folds for the forest"},
      {"eval.runs", "5", ConfigType::kU64, "repeated trainings for the networks"},
      {"eval.test_fraction", "0.3", ConfigType::kDouble, "hold-out fraction for the networks"},
      {"eval.stratify", "false", ConfigType::kBool, "stratify the hold-out split"},
      {"eval.vary_split", "false", ConfigType::kBool,
       "re-draw the hold-out split for every run seed"},
  };
  return entries;
}

inline const ConfigEntry* find_config_entry(const std::string& key) {
  for (const ConfigEntry& e : config_schema()) {
    if (key == e.key) return &e;
  }
  return nullptr;
}

// Parsed "key = value" config with schema-backed defaults. Unknown keys are
// rejected at load time.
class Config {
 public:
  static Config defaults() { return Config(); }

  static Config from_text(const std::string& text, const std::filesystem::path& base_dir,
                          const std::string& origin = "<config>") {
    Config config;
    config.base_dir_ = base_dir;
    std::size_t lineno = 0;
    for (const std::string& raw_line : split(text, '\n')) {
      ++lineno;
      std::string line = raw_line;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (!find_config_entry(key)) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
      }
      if (config.values_.count(key)) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      }
      config.values_[key] = value;
    }
    config.validate_types();
    return config;
  }

  static Config load(const std::filesystem::path& path) {
    std::string text;
    try {
      text = read_file(path);
    } catch (const FileError&) {
      throw FileError("cannot open config file: " + path.string());
    }
    return from_text(text, std::filesystem::absolute(path).parent_path(), path.string());
  }

  bool is_set(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const { return raw(key); }

  std::uint64_t get_u64(const std::string& key) const {
    return parse_u64(key, raw(key));
  }

  double get_double(const std::string& key) const {
    return parse_double(key, raw(key));
  }

  bool get_bool(const std::string& key) const {
    return parse_bool(key, raw(key));
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    for (const std::string& part : split(raw(key), ',')) {
      std::string t = trim(part);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  std::vector<int> get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& part : get_list(key)) {
      out.push_back(static_cast<int>(parse_u64(key, part)));
    }
    return out;
  }

  // Path values resolve relative to the config file's directory.
  std::filesystem::path get_path(const std::string& key) const {
    std::filesystem::path p(raw(key));
    if (p.empty() || p.is_absolute()) return p;
    return base_dir_ / p;
  }

  std::vector<std::filesystem::path> get_path_list(const std::string& key) const {
    std::vector<std::filesystem::path> out;
    for (const std::string& part : get_list(key)) {
      std::filesystem::path p(part);
      out.push_back(p.is_absolute() ? p : base_dir_ / p);
    }
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    const ConfigEntry* e = find_config_entry(key);
    if (!e) throw ConfigError("unknown key '" + key + "'");
    validate_value(*e, value);
    values_[key] = value;
  }

  // Effective key = value lines for every schema key, with paths resolved,
  // suitable for byte-exact re-execution.
  std::string snapshot() const {
    std::string out;
    for (const ConfigEntry& e : config_schema()) {
      out += e.key;
      out += " = ";
      if (e.type == ConfigType::kPath) {
        out += get_path(e.key).string();
      } else if (e.type == ConfigType::kPathList) {
        const auto paths = get_path_list(e.key);
        for (std::size_t i = 0; i < paths.size(); ++i) {
          if (i) out += ',';
          out += paths[i].string();
        }
      } else {
        out += raw(e.key);
      }
      out += '\n';
    }
    return out;
  }

  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::string raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    const ConfigEntry* e = find_config_entry(key);
    if (!e) throw ConfigError("unknown key '" + key + "'");
    return e->default_value;
  }

  static std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      std::uint64_t out = std::stoull(v, &pos);
      if (pos != v.size()) throw ConfigError("");
      return out;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
  }

  static double parse_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      double out = std::stod(v, &pos);
      if (pos != v.size()) throw ConfigError("");
      return out;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
  }

  static bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
  }

  static void validate_value(const ConfigEntry& e, const std::string& value) {
    switch (e.type) {
      case ConfigType::kU64:
        parse_u64(e.key, value);
        break;
      case ConfigType::kDouble:
        parse_double(e.key, value);
        break;
      case ConfigType::kBool:
        parse_bool(e.key, value);
        break;
      case ConfigType::kIntList:
        for (const std::string& part : split(value, ',')) {
          if (!trim(part).empty()) parse_u64(e.key, trim(part));
        }
        break;
      default:
        break;
    }
  }

  void validate_types() const {
    for (const auto& [key, value] : values_) {
      validate_value(*find_config_entry(key), value);
    }
  }

  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_ = std::filesystem::current_path();
};

inline std::string config_schema_text() {
  std::string out;
  for (const ConfigEntry& e : config_schema()) {
    std::string line = e.key;
    line += " = ";
    line += e.default_value;
    while (line.size() < 44) line.push_back(' ');
    line += "# ";
    line += e.doc;
    out += line;
    out += '\n';
  }
  return out;
}

inline std::string version_and_schema_text() {
  std::string out = "edtweetlab ";
  out += kVersion;
  out += "\n\nconfiguration keys (defaults shown; paths resolve relative to the config file):\n\n";
  out += config_schema_text();
  return out;
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_CONFIG_HPP_
