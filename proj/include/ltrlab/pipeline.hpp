#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ltrlab/config.hpp"
#include "ltrlab/eval.hpp"
#include "ltrlab/explain.hpp"
#include "ltrlab/interleave.hpp"

namespace ltrlab::cli {

// Content scores for every item of a corpus (flattened group/item
// order), one vector per model-backed source. Both are trained on the
// same judged sample so each variant only selects, never retrains.
struct ContentScores {
  std::vector<double> gbdt_baseline;
  std::vector<double> content_scorer;
};

ContentScores build_content_scores(const data::Dataset& corpus, const ExperimentConfig& config,
                                   std::uint64_t master_seed);

// Scores for one variant: selects from `shared` or loads the variant's
// two-column score file (pair id -> C).
std::vector<double> select_content_scores(const data::Dataset& corpus,
                                          const data::VariantConfig& variant,
                                          const ContentScores& shared);

std::vector<double> load_score_file(const data::Dataset& corpus, const std::filesystem::path& path);
void write_score_file(const data::Dataset& corpus, std::span<const double> scores,
                      const std::filesystem::path& path);

// Labels + channel filter + boosted training for one grid row.
ranker::TreeEnsemble train_variant(const data::Dataset& corpus, const data::VariantConfig& variant,
                                   std::span<const double> content_scores,
                                   const ExperimentConfig& config);

struct VariantOutcome {
  data::VariantConfig variant;
  bool ok = false;
  bool is_baseline = false;
  std::string error;
  eval::EvalReport offline;
  il::InterleaveReport online;
  explain::ImportanceReport importance;
  int xe_rank = 0;
  double xe_shap = 0.0;
};

struct GridResult {
  std::vector<VariantOutcome> rows;
  std::size_t xe_feature_index = 0;
};

// Full experiment: generate train/eval corpora, build shared content
// scores, then per variant label, train, compare offline and online
// against the baseline, and attribute features. A variant failure is
// recorded on its row without disturbing the others.
GridResult run_grid(const ExperimentConfig& config, const std::filesystem::path& out_dir);

void write_grid_report(const GridResult& result, const std::filesystem::path& out_dir);

// Figure-2 style histogram: fixed-width bins over [0, 1] with raw and
// transformed counts side by side.
void write_histogram_csv(std::span<const double> scores,
                         const std::optional<labels::SigmoidParams>& transform, int bins,
                         const std::filesystem::path& path);

}  // namespace ltrlab::cli
