#include "ltrlab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ltrlab/rng.hpp"

namespace ltrlab::cli {

namespace {

std::string pair_key(const std::string& query_id, const std::string& product_id) {
  return query_id + ":" + product_id;
}

struct JudgedSample {
  std::vector<labels::JudgedExample> scorer_examples;  // content-channel features
  std::vector<std::vector<double>> full_rows;          // full-width features
  std::vector<double> targets;                         // ratings mapped to [0, 1]
};

// Samples items, rates them once with the shared judge stream, and
// keeps both the restricted and full-width feature views.
JudgedSample draw_judged_sample(const data::Dataset& corpus, const ExperimentConfig& config,
                                std::uint64_t master_seed) {
  std::vector<std::pair<std::size_t, std::size_t>> index;  // (group, item)
  for (std::size_t g = 0; g < corpus.groups().size(); ++g)
    for (std::size_t i = 0; i < corpus.groups()[g].items.size(); ++i) index.emplace_back(g, i);

  const std::size_t want = std::min<std::size_t>(index.size(),
                                                 static_cast<std::size_t>(config.grid.judged_pairs));
  // Deterministic partial Fisher-Yates.
  Rng rng(derive_seed(master_seed, "judged-sample"));
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + rng.uniform_index(index.size() - i);
    std::swap(index[i], index[j]);
  }

  std::vector<std::size_t> content_indices;
  for (std::size_t f = 0; f < corpus.schema().size(); ++f) {
    const auto channel = corpus.schema().field(f).channel;
    if (channel == data::FeatureChannel::kSparseContent || channel == data::FeatureChannel::kXeDense)
      content_indices.push_back(f);
  }

  const std::uint64_t judge_seed = derive_seed(master_seed, "judge");
  JudgedSample sample;
  sample.scorer_examples.reserve(want);
  sample.full_rows.reserve(want);
  sample.targets.reserve(want);
  for (std::size_t s = 0; s < want; ++s) {
    const auto& group = corpus.groups()[index[s].first];
    const auto& item = group.items[index[s].second];
    const int rating = synth::simulate_judgment(
        item.latent->rho, config.judge,
        derive_seed(derive_seed(judge_seed, group.query.id), item.product_id));
    const double r = static_cast<double>(rating) / 4.0;

    labels::JudgedExample example;
    example.features.reserve(content_indices.size());
    for (std::size_t f : content_indices) example.features.push_back(item.features[f]);
    example.r = r;
    sample.scorer_examples.push_back(std::move(example));
    sample.full_rows.push_back(item.features);
    sample.targets.push_back(r);
  }
  return sample;
}

std::vector<std::size_t> content_channel_indices(const data::FeatureSchema& schema) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto channel = schema.field(f).channel;
    if (channel == data::FeatureChannel::kSparseContent || channel == data::FeatureChannel::kXeDense)
      out.push_back(f);
  }
  return out;
}

std::string format_metric(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

ContentScores build_content_scores(const data::Dataset& corpus, const ExperimentConfig& config,
                                   std::uint64_t master_seed) {
  if (!corpus.has_latent())
    throw std::runtime_error("build_content_scores: corpus lacks latent truth for judging");
  const JudgedSample judged = draw_judged_sample(corpus, config, master_seed);

  // Tree-regressor source, restricted to sparse content features.
  ranker::TrainConfig tree_config = config.baseline_scorer;
  tree_config.allowed_channels = {data::FeatureChannel::kSparseContent};
  const auto tree_model =
      ranker::train_regression(judged.full_rows, judged.targets, corpus.schema(), tree_config);

  // Trainable scorer source over all content channels.
  const auto scorer_model = labels::train_content_scorer(judged.scorer_examples, config.scorer);
  const auto content_indices = content_channel_indices(corpus.schema());

  ContentScores scores;
  scores.gbdt_baseline.reserve(corpus.total_items());
  scores.content_scorer.reserve(corpus.total_items());
  std::vector<double> restricted(content_indices.size());
  for (const auto& group : corpus.groups()) {
    for (const auto& item : group.items) {
      scores.gbdt_baseline.push_back(std::clamp(tree_model.predict(item.features), 0.0, 1.0));
      for (std::size_t i = 0; i < content_indices.size(); ++i)
        restricted[i] = item.features[content_indices[i]];
      scores.content_scorer.push_back(labels::predict_content(scorer_model, restricted));
    }
  }
  return scores;
}

std::vector<double> load_score_file(const data::Dataset& corpus, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("score file: cannot open '" + path.string() + "'");
  std::map<std::string, double> by_pair;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos)
      throw std::runtime_error("score file: line " + std::to_string(line_no) +
                               ": expected 'pair_id,score'");
    const std::string key = line.substr(0, comma);
    double value = 0.0;
    try {
      value = std::stod(line.substr(comma + 1));
    } catch (...) {
      throw std::runtime_error("score file: line " + std::to_string(line_no) + ": bad score");
    }
    if (!(value >= 0.0 && value <= 1.0))
      throw std::runtime_error("score file: line " + std::to_string(line_no) +
                               ": score outside [0, 1]");
    by_pair[key] = value;
  }

  std::vector<double> out;
  out.reserve(corpus.total_items());
  for (const auto& group : corpus.groups())
    for (const auto& item : group.items) {
      const auto it = by_pair.find(pair_key(group.query.id, item.product_id));
      if (it == by_pair.end())
        throw std::runtime_error("score file: missing pair '" +
                                 pair_key(group.query.id, item.product_id) + "'");
      out.push_back(it->second);
    }
  return out;
}

void write_score_file(const data::Dataset& corpus, std::span<const double> scores,
                      const std::filesystem::path& path) {
  if (scores.size() != corpus.total_items())
    throw std::invalid_argument("write_score_file: score count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("score file: cannot open '" + path.string() + "' for writing");
  std::size_t cursor = 0;
  for (const auto& group : corpus.groups())
    for (const auto& item : group.items)
      out << pair_key(group.query.id, item.product_id) << ',' << format_metric(scores[cursor++])
          << '\n';
}

std::vector<double> select_content_scores(const data::Dataset& corpus,
                                          const data::VariantConfig& variant,
                                          const ContentScores& shared) {
  switch (variant.content_source) {
    case data::ContentSource::kGbdtBaseline: return shared.gbdt_baseline;
    case data::ContentSource::kContentScorer: return shared.content_scorer;
    case data::ContentSource::kFileScores: return load_score_file(corpus, variant.scores_file);
  }
  throw std::logic_error("unknown ContentSource");
}

ranker::TreeEnsemble train_variant(const data::Dataset& corpus, const data::VariantConfig& variant,
                                   std::span<const double> content_scores,
                                   const ExperimentConfig& config) {
  const auto labels =
      labels::label_dataset(corpus, content_scores, config.grading, variant.transform);
  std::vector<std::vector<double>> y_per_group;
  y_per_group.reserve(labels.size());
  for (const auto& group : labels) {
    std::vector<double> ys;
    ys.reserve(group.size());
    for (const auto& label : group) ys.push_back(label.y);
    y_per_group.push_back(std::move(ys));
  }

  ranker::TrainConfig train_config = config.train;
  if (variant.use_xe_features) {
    train_config.allowed_channels.clear();  // all channels
  } else {
    train_config.allowed_channels = {data::FeatureChannel::kSparseContent,
                                     data::FeatureChannel::kEngagement};
  }
  train_config.seed = derive_seed(config.grid.master_seed, fnv1a_hash(variant.name));
  return ranker::train_ranker(corpus, y_per_group, train_config);
}

namespace {

struct VariantArtifacts {
  ranker::TreeEnsemble model;
  std::vector<double> content_scores;
};

VariantOutcome run_one_variant(const data::Dataset& corpus, const data::Dataset& eval_pool,
                               const ContentScores& shared,
                               const std::vector<std::vector<double>>& shap_sample,
                               const data::VariantConfig& variant, const ExperimentConfig& config,
                               const ranker::TreeEnsemble* baseline_model,
                               const std::filesystem::path& variant_dir,
                               std::size_t xe_feature_index) {
  VariantOutcome outcome;
  outcome.variant = variant;
  outcome.is_baseline = (variant.name == config.grid.baseline);
  const std::uint64_t variant_seed = derive_seed(config.grid.master_seed, fnv1a_hash(variant.name));

  const auto scores = select_content_scores(corpus, variant, shared);
  const ranker::TreeEnsemble model =
      outcome.is_baseline ? *baseline_model : train_variant(corpus, variant, scores, config);

  std::filesystem::create_directories(variant_dir);
  model.save(variant_dir / "model.txt");
  write_score_file(corpus, scores, variant_dir / "content_scores.csv");

  if (outcome.is_baseline) {
    // The reference row compares the model with itself; the deltas are
    // zero by definition, so no simulation is spent on them.
    outcome.offline.mean_baseline = 0.0;
    outcome.offline.mean_variant = 0.0;
    outcome.offline.pct_change = 0.0;
    outcome.offline.p = 1.0;
    outcome.offline.zero_variance = true;
    outcome.online.pct_change = 0.0;
    outcome.online.p = 1.0;
    outcome.online.zero_variance = true;
    outcome.online.n_sessions = 0;
  } else {
    outcome.offline = eval::evaluate_offline(*baseline_model, model, eval_pool, config.judge,
                                             config.grid.ndcg_k,
                                             derive_seed(config.grid.master_seed, "judge"));
    outcome.online = il::run_interleaving_experiment(*baseline_model, model, eval_pool, config.user,
                                                     config.grid.n_sessions,
                                                     derive_seed(variant_seed, "online"),
                                                     config.grid.atc_positions);
    std::ofstream per_query(variant_dir / "offline_per_query.csv");
    per_query << "query_id,ndcg_baseline,ndcg_variant\n";
    for (const auto& row : outcome.offline.per_query)
      per_query << row.query_id << ',' << format_metric(row.ndcg_baseline) << ','
                << format_metric(row.ndcg_variant) << '\n';
  }

  outcome.importance = explain::feature_importance(model, shap_sample);
  outcome.xe_rank = outcome.importance.rank[xe_feature_index];
  outcome.xe_shap = outcome.importance.mean_abs_phi[xe_feature_index];

  std::ofstream importance_csv(variant_dir / "importance.csv");
  importance_csv << "feature,channel,mean_abs_shap,rank\n";
  const auto& schema = corpus.schema();
  for (std::size_t f = 0; f < schema.size(); ++f)
    importance_csv << schema.field(f).name << ',' << data::to_string(schema.field(f).channel) << ','
                   << format_metric(outcome.importance.mean_abs_phi[f]) << ','
                   << outcome.importance.rank[f] << '\n';

  outcome.ok = true;
  return outcome;
}

}  // namespace

GridResult run_grid(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  if (config.variants.empty()) throw std::runtime_error("run_grid: no variants configured");

  bool baseline_found = false;
  for (const auto& v : config.variants) baseline_found |= (v.name == config.grid.baseline);
  if (!baseline_found)
    throw std::runtime_error("run_grid: baseline variant '" + config.grid.baseline +
                             "' not in variant list");

  std::filesystem::create_directories(out_dir);

  // Corpora are derived from the master seed so the whole grid is a
  // pure function of (config, master seed).
  synth::GenConfig train_gen = config.gen;
  train_gen.seed = derive_seed(config.grid.master_seed, "train-corpus");
  const data::Dataset corpus = synth::generate_corpus(train_gen, config.user);

  synth::GenConfig eval_gen = config.gen;
  eval_gen.n_queries = config.grid.eval_queries;
  eval_gen.seed = derive_seed(config.grid.master_seed, "eval-corpus");
  const data::Dataset eval_pool = synth::generate_corpus(eval_gen, config.user);

  const ContentScores shared = build_content_scores(corpus, config, config.grid.master_seed);

  // Fixed instance sample shared by every variant's attribution pass.
  std::vector<std::vector<double>> shap_sample;
  {
    std::vector<const data::Item*> items;
    for (const auto& group : corpus.groups())
      for (const auto& item : group.items) items.push_back(&item);
    Rng rng(derive_seed(config.grid.master_seed, "shap-sample"));
    const std::size_t want =
        std::min<std::size_t>(items.size(), static_cast<std::size_t>(config.grid.shap_sample));
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = i + rng.uniform_index(items.size() - i);
      std::swap(items[i], items[j]);
      shap_sample.push_back(items[i]->features);
    }
  }

  const auto xe_indices = corpus.schema().indices_of(data::FeatureChannel::kXeDense);
  if (xe_indices.empty()) throw std::runtime_error("run_grid: schema has no xe-dense feature");
  const std::size_t xe_feature_index = xe_indices.front();

  GridResult result;
  result.xe_feature_index = xe_feature_index;
  result.rows.resize(config.variants.size());

  // The baseline must exist before any comparison runs.
  std::size_t baseline_pos = 0;
  for (std::size_t i = 0; i < config.variants.size(); ++i)
    if (config.variants[i].name == config.grid.baseline) baseline_pos = i;

  ranker::TreeEnsemble baseline_model;
  {
    const auto& variant = config.variants[baseline_pos];
    const auto scores = select_content_scores(corpus, variant, shared);
    baseline_model = train_variant(corpus, variant, scores, config);
  }

  auto run_row = [&](std::size_t i) {
    const auto& variant = config.variants[i];
    try {
      result.rows[i] = run_one_variant(corpus, eval_pool, shared, shap_sample, variant, config,
                                       &baseline_model, out_dir / "variants" / variant.name,
                                       xe_feature_index);
    } catch (const std::exception& e) {
      VariantOutcome failed;
      failed.variant = variant;
      failed.ok = false;
      failed.error = e.what();
      result.rows[i] = std::move(failed);
    }
  };

  // Variants are independent; run them on a small worker pool with a
  // deterministic assignment.
  std::vector<std::future<void>> workers;
  std::atomic<std::size_t> next{0};
  const unsigned n_workers = std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                                                static_cast<unsigned>(config.variants.size()));
  for (unsigned w = 0; w < n_workers; ++w) {
    workers.push_back(std::async(std::launch::async, [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= config.variants.size()) return;
        run_row(i);
      }
    }));
  }
  for (auto& worker : workers) worker.get();

  write_grid_report(result, out_dir);
  return result;
}

void write_grid_report(const GridResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  {
    std::ofstream csv(out_dir / "grid_report.csv");
    csv << "variant,content_source,alpha,beta,use_xe,status,"
           "ndcg_baseline_mean,ndcg_variant_mean,ndcg_pct_change,ndcg_p,eval_queries,"
           "atc_a,atc_b,atc_pct_change,atc_p,sessions,xe_rank,xe_mean_abs_shap,error\n";
    for (const auto& row : result.rows) {
      const auto& v = row.variant;
      csv << v.name << ',' << data::to_string(v.content_source) << ',';
      if (v.transform)
        csv << format_metric(v.transform->alpha) << ',' << format_metric(v.transform->beta);
      else
        csv << ',';
      csv << ',' << (v.use_xe_features ? "yes" : "no") << ',';
      if (!row.ok) {
        csv << "error,,,,,,,,,,,,," << row.error << '\n';
        continue;
      }
      csv << (row.is_baseline ? "baseline" : "ok") << ',' << format_metric(row.offline.mean_baseline)
          << ',' << format_metric(row.offline.mean_variant) << ','
          << format_metric(row.offline.pct_change) << ',' << format_metric(row.offline.p) << ','
          << row.offline.n_queries << ',' << format_metric(row.online.atc_a) << ','
          << format_metric(row.online.atc_b) << ',' << format_metric(row.online.pct_change) << ','
          << format_metric(row.online.p) << ',' << row.online.n_sessions << ',' << row.xe_rank << ','
          << format_metric(row.xe_shap) << ",\n";
    }
  }

  {
    std::ofstream txt(out_dir / "grid_report.txt");
    char line[256];
    std::snprintf(line, sizeof(line), "%-12s %-16s %-12s %-4s %12s %8s %12s %8s %8s %10s\n",
                  "variant", "content", "transform", "XE", "NDCG@10 chg", "p", "ATC@40 chg", "p",
                  "XE rank", "XE SHAP");
    txt << line;
    for (const auto& row : result.rows) {
      const auto& v = row.variant;
      std::string transform = "-";
      if (v.transform) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "a=%g b=%g", v.transform->alpha, v.transform->beta);
        transform = buf;
      }
      if (!row.ok) {
        std::snprintf(line, sizeof(line), "%-12s %-16s %-12s %-4s FAILED: %s\n", v.name.c_str(),
                      std::string(data::to_string(v.content_source)).c_str(), transform.c_str(),
                      v.use_xe_features ? "yes" : "no", row.error.c_str());
        txt << line;
        continue;
      }
      std::snprintf(line, sizeof(line),
                    "%-12s %-16s %-12s %-4s %+11.2f%% %8.4f %+11.2f%% %8.4f %8d %10.4f\n",
                    v.name.c_str(), std::string(data::to_string(v.content_source)).c_str(),
                    transform.c_str(), v.use_xe_features ? "yes" : "no", row.offline.pct_change,
                    row.offline.p, row.online.pct_change, row.online.p, row.xe_rank, row.xe_shap);
      txt << line;
    }
  }
}

void write_histogram_csv(std::span<const double> scores,
                         const std::optional<labels::SigmoidParams>& transform, int bins,
                         const std::filesystem::path& path) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  std::vector<long long> raw(bins, 0), transformed(bins, 0);
  auto bin_of = [&](double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("histogram: score outside [0, 1]");
    const int b = static_cast<int>(v * bins);
    return std::min(b, bins - 1);
  };
  for (double s : scores) {
    raw[bin_of(s)] += 1;
    const double t = transform ? labels::sigmoid_transform(s, *transform) : s;
    transformed[bin_of(t)] += 1;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("histogram: cannot open '" + path.string() + "' for writing");
  out << "bin_lo,bin_hi,count_raw,count_transformed\n";
  for (int b = 0; b < bins; ++b) {
    out << format_metric(static_cast<double>(b) / bins) << ','
        << format_metric(static_cast<double>(b + 1) / bins) << ',' << raw[b] << ',' << transformed[b]
        << '\n';
  }
}

}  // namespace ltrlab::cli
