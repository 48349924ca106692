#include "ltrlab/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ltrlab::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

[[noreturn]] void config_fail(const std::string& what) {
  throw std::runtime_error("config error: " + what);
}

double to_double(const std::string& section, const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    config_fail("[" + section + "] " + key + ": expected a number, got '" + value + "'");
  }
}

int to_int(const std::string& section, const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return static_cast<int>(v);
  } catch (...) {
    config_fail("[" + section + "] " + key + ": expected an integer, got '" + value + "'");
  }
}

std::uint64_t to_u64(const std::string& section, const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    config_fail("[" + section + "] " + key + ": expected an unsigned integer, got '" + value + "'");
  }
}

bool to_bool(const std::string& section, const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  config_fail("[" + section + "] " + key + ": expected true/false, got '" + value + "'");
}

using KeyHandler = std::function<void(const std::string& section, const std::string& key,
                                      const std::string& value)>;

}  // namespace

void ExperimentConfig::validate() const {
  gen.validate();
  user.validate();
  judge.validate();
  train.validate();
  grading.validate();
  scorer.validate();
  baseline_scorer.validate();
  if (grid.eval_queries < 1) config_fail("[grid] eval_queries must be >= 1");
  if (grid.n_sessions < 1) config_fail("[grid] n_sessions must be >= 1");
  if (grid.judged_pairs < 2) config_fail("[grid] judged_pairs must be >= 2");
  if (grid.shap_sample < 1) config_fail("[grid] shap_sample must be >= 1");
  if (grid.ndcg_k < 1) config_fail("[grid] ndcg_k must be >= 1");
  if (grid.atc_positions < 1) config_fail("[grid] atc_positions must be >= 1");
  std::set<std::string> names;
  for (const auto& variant : variants) {
    if (variant.name.empty()) config_fail("variant with empty name");
    if (!names.insert(variant.name).second) config_fail("duplicate variant name '" + variant.name + "'");
    if (variant.transform) variant.transform->validate();
    if (variant.content_source == data::ContentSource::kFileScores && variant.scores_file.empty())
      config_fail("variant '" + variant.name + "' uses file_scores but has no scores_file");
  }
}

void ExperimentConfig::require_sections(const std::vector<std::string>& names) const {
  for (const auto& name : names)
    if (!sections.contains(name)) config_fail("missing required section [" + name + "]");
}

const data::VariantConfig& ExperimentConfig::variant(const std::string& name) const {
  for (const auto& v : variants)
    if (v.name == name) return v;
  config_fail("unknown variant '" + name + "'");
}

ExperimentConfig default_config() {
  ExperimentConfig config;
  config.baseline_scorer.n_trees = 60;
  config.baseline_scorer.max_depth = 3;
  config.baseline_scorer.min_leaf_count = 25;
  config.baseline_scorer.learning_rate = 0.2;

  auto add = [&](std::string name, data::ContentSource source, bool use_xe,
                 std::optional<labels::SigmoidParams> transform) {
    data::VariantConfig v;
    v.name = std::move(name);
    v.content_source = source;
    v.use_xe_features = use_xe;
    v.transform = transform;
    config.variants.push_back(std::move(v));
  };
  using data::ContentSource;
  add("Baseline", ContentSource::kGbdtBaseline, false, std::nullopt);
  add("X", ContentSource::kGbdtBaseline, true, std::nullopt);
  add("L", ContentSource::kContentScorer, false, std::nullopt);
  add("LX", ContentSource::kContentScorer, true, std::nullopt);
  add("sigma_cLX", ContentSource::kContentScorer, true, labels::SigmoidParams{12.0, 0.5});
  add("sigma_rLX", ContentSource::kContentScorer, true, labels::SigmoidParams{10.0, 0.7});
  add("sigma_lLX", ContentSource::kContentScorer, true, labels::SigmoidParams{10.0, 0.3});

  config.sections = {"gen", "user", "judge", "train", "grading", "scorer", "baseline_scorer", "grid"};
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_fail("cannot open '" + path.string() + "'");

  ExperimentConfig config;
  config.variants.clear();

  data::VariantConfig* current_variant = nullptr;
  // Transform params arrive as separate keys; resolved when the variant
  // section ends.
  struct PendingTransform {
    std::optional<double> alpha, beta;
  } pending;
  std::string pending_variant_name;

  auto finish_variant = [&]() {
    if (current_variant == nullptr) return;
    if (pending.alpha.has_value() != pending.beta.has_value())
      config_fail("variant '" + current_variant->name + "': alpha and beta must be set together");
    if (pending.alpha) current_variant->transform = labels::SigmoidParams{*pending.alpha, *pending.beta};
    pending = {};
    current_variant = nullptr;
  };

  std::unordered_map<std::string, KeyHandler> handlers;
  handlers["gen"] = [&](const std::string& s, const std::string& k, const std::string& v) {
    auto& g = config.gen;
    if (k == "n_queries") g.n_queries = to_int(s, k, v);
    else if (k == "items_per_group") g.items_per_group = to_int(s, k, v);
    else if (k == "n_sparse_features") g.n_sparse_features = to_int(s, k, v);
    else if (k == "sparse_noise") g.sparse_noise = to_double(s, k, v);
    else if (k == "xe_noise") g.xe_noise = to_double(s, k, v);
    else if (k == "engagement_feature_noise") g.engagement_feature_noise = to_double(s, k, v);
    else if (k == "logging_noise") g.logging_noise = to_double(s, k, v);
    else if (k == "head_weight") g.head_weight = to_double(s, k, v);
    else if (k == "torso_weight") g.torso_weight = to_double(s, k, v);
    else if (k == "tail_weight") g.tail_weight = to_double(s, k, v);
    else if (k == "seed") g.seed = to_u64(s, k, v);
    else config_fail("[gen] unknown key '" + k + "'");
  };
  handlers["user"] = [&](const std::string& s, const std::string& k, const std::string& v) {
    auto& u = config.user;
    if (k == "persistence") u.persistence = to_double(s, k, v);
    else if (k == "click_slope") u.click_slope = to_double(s, k, v);
    else if (k == "atc_slope") u.atc_slope = to_double(s, k, v);
    else if (k == "order_slope") u.order_slope = to_double(s, k, v);
    else config_fail("[user] unknown key '" + k + "'");
  };
  handlers["judge"] = [&](const std::string& s, const std::string& k, const std::string& v) {
    auto& j = config.judge;
    if (k == "judge_noise") {
      j.judge_noise = to_double(s, k, v);
    } else if (k == "thresholds") {
      std::stringstream ss(v);
      std::string part;
      std::vector<double> values;
      while (std::getline(ss, part, ';')) values.push_back(to_double(s, k, trim(part)));
      if (values.size() != 4) config_fail("[judge] thresholds: expected 4 ';'-separated values");
      for (std::size_t i = 0; i < 4; ++i) j.thresholds[i] = values[i];
    } else {
      config_fail("[judge] unknown key '" + k + "'");
    }
  };
  auto train_handler = [&](ranker::TrainConfig& t) {
    return [&t](const std::string& s, const std::string& k, const std::string& v) {
      if (k == "n_trees") t.n_trees = to_int(s, k, v);
      else if (k == "max_depth") t.max_depth = to_int(s, k, v);
      else if (k == "min_leaf_count") t.min_leaf_count = to_int(s, k, v);
      else if (k == "learning_rate") t.learning_rate = to_double(s, k, v);
      else if (k == "ndcg_truncation") t.ndcg_truncation = to_int(s, k, v);
      else config_fail("[" + s + "] unknown key '" + k + "'");
    };
  };
  handlers["train"] = train_handler(config.train);
  handlers["baseline_scorer"] = train_handler(config.baseline_scorer);
  handlers["grading"] = [&](const std::string& s, const std::string& k, const std::string& v) {
    auto& g = config.grading;
    if (k == "non_engaged") g.non_engaged = to_double(s, k, v);
    else if (k == "clicked") g.clicked = to_double(s, k, v);
    else if (k == "added_to_cart") g.added_to_cart = to_double(s, k, v);
    else if (k == "ordered") g.ordered = to_double(s, k, v);
    else if (k == "normalize_within_group") g.normalize_within_group = to_bool(s, k, v);
    else config_fail("[grading] unknown key '" + k + "'");
  };
  handlers["scorer"] = [&](const std::string& s, const std::string& k, const std::string& v) {
    if (k == "epochs") config.scorer.epochs = to_int(s, k, v);
    else if (k == "learning_rate") config.scorer.learning_rate = to_double(s, k, v);
    else config_fail("[scorer] unknown key '" + k + "'");
  };
  handlers["grid"] = [&](const std::string& s, const std::string& k, const std::string& v) {
    auto& g = config.grid;
    if (k == "master_seed") g.master_seed = to_u64(s, k, v);
    else if (k == "eval_queries") g.eval_queries = to_int(s, k, v);
    else if (k == "n_sessions") g.n_sessions = to_int(s, k, v);
    else if (k == "judged_pairs") g.judged_pairs = to_int(s, k, v);
    else if (k == "shap_sample") g.shap_sample = to_int(s, k, v);
    else if (k == "ndcg_k") g.ndcg_k = to_int(s, k, v);
    else if (k == "atc_positions") g.atc_positions = to_int(s, k, v);
    else if (k == "baseline") g.baseline = v;
    else config_fail("[grid] unknown key '" + k + "'");
  };

  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    if (text.front() == '[') {
      if (text.back() != ']') config_fail("line " + std::to_string(line_no) + ": unterminated section header");
      finish_variant();
      section = trim(text.substr(1, text.size() - 2));
      if (section.starts_with("variant")) {
        const std::string name = trim(section.substr(7));
        if (name.empty()) config_fail("line " + std::to_string(line_no) + ": variant section needs a name");
        config.variants.push_back({});
        current_variant = &config.variants.back();
        current_variant->name = name;
        current_variant->transform = std::nullopt;
        current_variant->use_xe_features = false;
        section = "variant";
        config.sections.insert("variant " + name);
      } else {
        if (!handlers.contains(section))
          config_fail("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
        config.sections.insert(section);
      }
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      config_fail("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (section.empty()) config_fail("line " + std::to_string(line_no) + ": key outside any section");

    if (section == "variant") {
      auto& v = *current_variant;
      if (key == "content_source") {
        const auto source = data::content_source_from_string(value);
        if (!source) config_fail("variant '" + v.name + "': unknown content_source '" + value + "'");
        v.content_source = *source;
      } else if (key == "use_xe_features") {
        v.use_xe_features = to_bool(section, key, value);
      } else if (key == "alpha") {
        pending.alpha = to_double(section, key, value);
      } else if (key == "beta") {
        pending.beta = to_double(section, key, value);
      } else if (key == "scores_file") {
        v.scores_file = value;
      } else {
        config_fail("variant '" + v.name + "': unknown key '" + key + "'");
      }
    } else {
      handlers.at(section)(section, key, value);
    }
  }
  finish_variant();
  config.validate();
  return config;
}

namespace {

std::string format_compact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) config_fail("cannot open '" + path.string() + "' for writing");

  out << "[gen]\n";
  out << "n_queries = " << config.gen.n_queries << '\n';
  out << "items_per_group = " << config.gen.items_per_group << '\n';
  out << "n_sparse_features = " << config.gen.n_sparse_features << '\n';
  out << "sparse_noise = " << format_compact(config.gen.sparse_noise) << '\n';
  out << "xe_noise = " << format_compact(config.gen.xe_noise) << '\n';
  out << "engagement_feature_noise = " << format_compact(config.gen.engagement_feature_noise) << '\n';
  out << "logging_noise = " << format_compact(config.gen.logging_noise) << '\n';
  out << "head_weight = " << format_compact(config.gen.head_weight) << '\n';
  out << "torso_weight = " << format_compact(config.gen.torso_weight) << '\n';
  out << "tail_weight = " << format_compact(config.gen.tail_weight) << '\n';
  out << "seed = " << config.gen.seed << '\n';

  out << "\n[user]\n";
  out << "persistence = " << format_compact(config.user.persistence) << '\n';
  out << "click_slope = " << format_compact(config.user.click_slope) << '\n';
  out << "atc_slope = " << format_compact(config.user.atc_slope) << '\n';
  out << "order_slope = " << format_compact(config.user.order_slope) << '\n';

  out << "\n[judge]\n";
  out << "thresholds = " << format_compact(config.judge.thresholds[0]) << "; "
      << format_compact(config.judge.thresholds[1]) << "; " << format_compact(config.judge.thresholds[2])
      << "; " << format_compact(config.judge.thresholds[3]) << '\n';
  out << "judge_noise = " << format_compact(config.judge.judge_noise) << '\n';

  auto dump_train = [&](const char* name, const ranker::TrainConfig& t, bool with_truncation) {
    out << "\n[" << name << "]\n";
    out << "n_trees = " << t.n_trees << '\n';
    out << "max_depth = " << t.max_depth << '\n';
    out << "min_leaf_count = " << t.min_leaf_count << '\n';
    out << "learning_rate = " << format_compact(t.learning_rate) << '\n';
    if (with_truncation) out << "ndcg_truncation = " << t.ndcg_truncation << '\n';
  };
  dump_train("train", config.train, true);
  dump_train("baseline_scorer", config.baseline_scorer, false);

  out << "\n[grading]\n";
  out << "non_engaged = " << format_compact(config.grading.non_engaged) << '\n';
  out << "clicked = " << format_compact(config.grading.clicked) << '\n';
  out << "added_to_cart = " << format_compact(config.grading.added_to_cart) << '\n';
  out << "ordered = " << format_compact(config.grading.ordered) << '\n';
  out << "normalize_within_group = " << (config.grading.normalize_within_group ? "true" : "false")
      << '\n';

  out << "\n[scorer]\n";
  out << "epochs = " << config.scorer.epochs << '\n';
  out << "learning_rate = " << format_compact(config.scorer.learning_rate) << '\n';

  out << "\n[grid]\n";
  out << "master_seed = " << config.grid.master_seed << '\n';
  out << "eval_queries = " << config.grid.eval_queries << '\n';
  out << "n_sessions = " << config.grid.n_sessions << '\n';
  out << "judged_pairs = " << config.grid.judged_pairs << '\n';
  out << "shap_sample = " << config.grid.shap_sample << '\n';
  out << "ndcg_k = " << config.grid.ndcg_k << '\n';
  out << "atc_positions = " << config.grid.atc_positions << '\n';
  out << "baseline = " << config.grid.baseline << '\n';

  for (const auto& v : config.variants) {
    out << "\n[variant " << v.name << "]\n";
    out << "content_source = " << data::to_string(v.content_source) << '\n';
    out << "use_xe_features = " << (v.use_xe_features ? "true" : "false") << '\n';
    if (v.transform) {
      out << "alpha = " << format_compact(v.transform->alpha) << '\n';
      out << "beta = " << format_compact(v.transform->beta) << '\n';
    }
    if (!v.scores_file.empty()) out << "scores_file = " << v.scores_file << '\n';
  }
  if (!out) config_fail("write failure on '" + path.string() + "'");
}

}  // namespace ltrlab::cli
