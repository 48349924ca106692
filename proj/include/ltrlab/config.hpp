#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ltrlab/datamodel.hpp"
#include "ltrlab/labelforge.hpp"
#include "ltrlab/ranker.hpp"
#include "ltrlab/synthgen.hpp"

namespace ltrlab::cli {

// Knobs of the experiment harness itself (pool sizes, seeds, which
// variant anchors the comparisons).
struct GridSettings {
  std::uint64_t master_seed = 42;
  int eval_queries = 250;
  int n_sessions = 4000;
  int judged_pairs = 3000;
  int shap_sample = 200;
  int ndcg_k = 10;
  int atc_positions = 40;
  std::string baseline = "Baseline";
};

// Everything an experiment needs, one section per module. `sections`
// records which section headers were present in the file so commands
// can insist on the ones they require.
struct ExperimentConfig {
  synth::GenConfig gen;
  synth::UserModelParams user;
  synth::JudgeModelParams judge;
  ranker::TrainConfig train;
  labels::EngagementGrading grading;
  labels::ScorerConfig scorer;
  ranker::TrainConfig baseline_scorer;  // tree-regressor content source
  GridSettings grid;
  std::vector<data::VariantConfig> variants;
  std::set<std::string> sections;

  void validate() const;
  void require_sections(const std::vector<std::string>& names) const;
  const data::VariantConfig& variant(const std::string& name) const;
};

// The shipped seven-row grid: Baseline, X, L, LX and the three
// sigmoid-transformed rows (alpha=12 beta=0.5; alpha=10 beta=0.7;
// alpha=10 beta=0.3).
ExperimentConfig default_config();

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

}  // namespace ltrlab::cli
