#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltrlab/config.hpp"
#include "ltrlab/datamodel.hpp"
#include "ltrlab/eval.hpp"
#include "ltrlab/explain.hpp"
#include "ltrlab/interleave.hpp"
#include "ltrlab/pipeline.hpp"
#include "ltrlab/rng.hpp"
#include "ltrlab/synthgen.hpp"

namespace {

using namespace ltrlab;

struct CommonOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

cli::ExperimentConfig load_with_seed(const CommonOptions& common) {
  auto config = cli::load_config(common.config_path);
  if (common.seed_set) {
    config.grid.master_seed = common.seed;
    config.gen.seed = common.seed;
  }
  return config;
}

int cmd_generate(const CommonOptions& common, const std::string& out_path) {
  const auto config = load_with_seed(common);
  config.require_sections({"gen", "user"});
  const auto dataset = synth::generate_corpus(config.gen, config.user);
  data::save_dataset(dataset, out_path);
  std::cout << "wrote " << dataset.groups().size() << " groups (" << dataset.total_items()
            << " items) to " << out_path << "\n";
  return 0;
}

int cmd_train(const CommonOptions& common, const std::string& data_path,
              const std::string& variant_name, const std::string& out_path) {
  const auto config = load_with_seed(common);
  config.require_sections({"judge", "train", "grading", "scorer", "baseline_scorer"});
  const auto& variant = config.variant(variant_name);
  const auto corpus = data::load_dataset(data_path);
  const auto shared = cli::build_content_scores(corpus, config, config.grid.master_seed);
  const auto scores = cli::select_content_scores(corpus, variant, shared);
  const auto model = cli::train_variant(corpus, variant, scores, config);
  model.save(out_path);
  std::cout << "trained variant '" << variant_name << "' (" << model.trees().size() << " trees) -> "
            << out_path << "\n";
  return 0;
}

int cmd_evaluate(const CommonOptions& common, const std::string& data_path,
                 const std::string& baseline_path, const std::string& variant_path,
                 const std::string& out_path) {
  const auto config = load_with_seed(common);
  config.require_sections({"judge"});
  const auto pool = data::load_dataset(data_path);
  const auto baseline = ranker::TreeEnsemble::load(baseline_path);
  const auto variant = ranker::TreeEnsemble::load(variant_path);
  const auto report =
      eval::evaluate_offline(baseline, variant, pool, config.judge, config.grid.ndcg_k,
                             derive_seed(config.grid.master_seed, "judge"));
  std::ofstream out(out_path);
  out << "metric,value\n";
  out << "ndcg_baseline_mean," << report.mean_baseline << '\n';
  out << "ndcg_variant_mean," << report.mean_variant << '\n';
  out << "pct_change," << report.pct_change << '\n';
  out << "t," << report.t << '\n';
  out << "p," << report.p << '\n';
  out << "n_queries," << report.n_queries << '\n';
  out << "n_excluded," << report.n_excluded << '\n';
  std::cout << "NDCG@" << config.grid.ndcg_k << " change " << report.pct_change << "% (p=" << report.p
            << ", n=" << report.n_queries << ") -> " << out_path << "\n";
  return 0;
}

int cmd_interleave(const CommonOptions& common, const std::string& data_path,
                   const std::string& baseline_path, const std::string& variant_path,
                   const std::string& out_path) {
  const auto config = load_with_seed(common);
  config.require_sections({"user"});
  const auto pool = data::load_dataset(data_path);
  const auto baseline = ranker::TreeEnsemble::load(baseline_path);
  const auto variant = ranker::TreeEnsemble::load(variant_path);
  const auto report = il::run_interleaving_experiment(
      baseline, variant, pool, config.user, config.grid.n_sessions,
      derive_seed(config.grid.master_seed, "online"), config.grid.atc_positions);
  std::ofstream out(out_path);
  out << "metric,value\n";
  out << "atc_baseline," << report.atc_a << '\n';
  out << "atc_variant," << report.atc_b << '\n';
  out << "pct_change," << report.pct_change << '\n';
  out << "t," << report.t << '\n';
  out << "p," << report.p << '\n';
  out << "n_sessions," << report.n_sessions << '\n';
  std::cout << "ATC@" << config.grid.atc_positions << " change " << report.pct_change
            << "% (p=" << report.p << ", sessions=" << report.n_sessions << ") -> " << out_path
            << "\n";
  return 0;
}

int cmd_explain(const std::string& model_path, const std::string& data_path,
                const std::string& out_path, int sample_size, std::uint64_t seed) {
  const auto corpus = data::load_dataset(data_path);
  const auto model = ranker::TreeEnsemble::load(model_path);

  std::vector<const data::Item*> items;
  for (const auto& group : corpus.groups())
    for (const auto& item : group.items) items.push_back(&item);
  Rng rng(derive_seed(seed, "shap-sample"));
  std::vector<std::vector<double>> sample;
  const std::size_t want = std::min<std::size_t>(items.size(), static_cast<std::size_t>(sample_size));
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + rng.uniform_index(items.size() - i);
    std::swap(items[i], items[j]);
    sample.push_back(items[i]->features);
  }

  const auto report = explain::feature_importance(model, sample);
  std::ofstream out(out_path);
  out << "feature,channel,mean_abs_shap,rank\n";
  for (std::size_t f = 0; f < corpus.schema().size(); ++f)
    out << corpus.schema().field(f).name << ',' << data::to_string(corpus.schema().field(f).channel)
        << ',' << report.mean_abs_phi[f] << ',' << report.rank[f] << '\n';
  std::cout << "feature importance over " << sample.size() << " instances -> " << out_path << "\n";
  return 0;
}

int cmd_grid(const CommonOptions& common, const std::string& out_dir) {
  const auto config = load_with_seed(common);
  config.require_sections(
      {"gen", "user", "judge", "train", "grading", "scorer", "baseline_scorer", "grid"});
  const auto result = cli::run_grid(config, out_dir);
  std::ifstream table(std::filesystem::path(out_dir) / "grid_report.txt");
  std::cout << table.rdbuf();
  bool all_ok = true;
  for (const auto& row : result.rows)
    if (!row.ok) {
      std::cerr << "error: variant '" << row.variant.name << "' failed: " << row.error << "\n";
      all_ok = false;
    }
  return all_ok ? 0 : 1;
}

int cmd_histogram(const CommonOptions& common, const std::string& scores_path,
                  const std::string& variant_name, double alpha, double beta, int bins,
                  const std::string& out_path) {
  std::optional<labels::SigmoidParams> transform;
  if (!variant_name.empty()) {
    if (common.config_path.empty())
      throw std::runtime_error("histogram: --variant requires --config");
    const auto config = load_with_seed(common);
    transform = config.variant(variant_name).transform;
  } else if (alpha > 0.0) {
    transform = labels::SigmoidParams{alpha, beta};
    transform->validate();
  }

  std::ifstream in(scores_path);
  if (!in) throw std::runtime_error("histogram: cannot open '" + scores_path + "'");
  std::vector<double> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    // Accept bare scores or pair_id,score rows.
    const auto comma = line.rfind(',');
    const std::string text = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      scores.push_back(std::stod(text));
    } catch (...) {
      throw std::runtime_error("histogram: bad score at line " + std::to_string(line_no) + ": '" +
                               text + "'");
    }
  }
  if (scores.empty()) throw std::runtime_error("histogram: no scores in '" + scores_path + "'");

  cli::write_histogram_csv(scores, transform, bins, out_path);
  std::cout << "histogram of " << scores.size() << " scores (" << bins << " bins) -> " << out_path
            << "\n";
  return 0;
}

void add_seed_option(CLI::App* sub, CommonOptions& common) {
  auto* opt = sub->add_option("--seed", common.seed, "override the master seed");
  opt->each([&common](const std::string&) { common.seed_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ltrlab: learning-to-rank label-formulation experiment toolkit"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* generate = app.add_subcommand("generate", "generate a synthetic corpus");
  std::string gen_out;
  generate->add_option("--config", common.config_path, "experiment config file")->required();
  generate->add_option("--out", gen_out, "output dataset path")->required();
  add_seed_option(generate, common);

  auto* train = app.add_subcommand("train", "label a corpus per a variant and train its ranker");
  std::string train_data, train_variant, train_out;
  train->add_option("--config", common.config_path)->required();
  train->add_option("--data", train_data, "training dataset")->required();
  train->add_option("--variant", train_variant, "variant name from the config")->required();
  train->add_option("--out", train_out, "output model path")->required();
  add_seed_option(train, common);

  auto* evaluate = app.add_subcommand("evaluate", "offline NDCG comparison of two models");
  std::string eval_data, eval_baseline, eval_variant, eval_out;
  evaluate->add_option("--config", common.config_path)->required();
  evaluate->add_option("--data", eval_data, "evaluation dataset (with latent truth)")->required();
  evaluate->add_option("--baseline-model", eval_baseline)->required();
  evaluate->add_option("--variant-model", eval_variant)->required();
  evaluate->add_option("--out", eval_out)->required();
  add_seed_option(evaluate, common);

  auto* interleave = app.add_subcommand("interleave", "simulated interleaving test of two models");
  std::string il_data, il_baseline, il_variant, il_out;
  interleave->add_option("--config", common.config_path)->required();
  interleave->add_option("--data", il_data, "evaluation dataset (with latent truth)")->required();
  interleave->add_option("--baseline-model", il_baseline)->required();
  interleave->add_option("--variant-model", il_variant)->required();
  interleave->add_option("--out", il_out)->required();
  add_seed_option(interleave, common);

  auto* explain_cmd = app.add_subcommand("explain", "SHAP feature importance of a model");
  std::string ex_model, ex_data, ex_out;
  int ex_sample = 200;
  std::uint64_t ex_seed = 42;
  explain_cmd->add_option("--model", ex_model)->required();
  explain_cmd->add_option("--data", ex_data)->required();
  explain_cmd->add_option("--out", ex_out)->required();
  explain_cmd->add_option("--sample", ex_sample, "number of instances to attribute");
  explain_cmd->add_option("--seed", ex_seed, "sampling seed");

  auto* grid = app.add_subcommand("grid", "run the full variant grid");
  std::string grid_out;
  grid->add_option("--config", common.config_path)->required();
  grid->add_option("--out", grid_out, "output directory")->required();
  add_seed_option(grid, common);

  auto* histogram = app.add_subcommand("histogram", "score distribution before/after transform");
  std::string hist_scores, hist_variant, hist_out;
  double hist_alpha = 0.0, hist_beta = 0.5;
  int hist_bins = 20;
  histogram->add_option("--scores", hist_scores, "score file (bare scores or pair_id,score)")
      ->required();
  histogram->add_option("--config", common.config_path, "config (for --variant transform lookup)");
  histogram->add_option("--variant", hist_variant, "variant whose transform to apply");
  histogram->add_option("--alpha", hist_alpha, "transform alpha (with --beta)");
  histogram->add_option("--beta", hist_beta, "transform beta");
  histogram->add_option("--bins", hist_bins, "bin count");
  histogram->add_option("--out", hist_out)->required();

  try {
    app.parse(argc, argv);
    if (generate->parsed()) return cmd_generate(common, gen_out);
    if (train->parsed()) return cmd_train(common, train_data, train_variant, train_out);
    if (evaluate->parsed())
      return cmd_evaluate(common, eval_data, eval_baseline, eval_variant, eval_out);
    if (interleave->parsed()) return cmd_interleave(common, il_data, il_baseline, il_variant, il_out);
    if (explain_cmd->parsed()) return cmd_explain(ex_model, ex_data, ex_out, ex_sample, ex_seed);
    if (grid->parsed()) return cmd_grid(common, grid_out);
    if (histogram->parsed())
      return cmd_histogram(common, hist_scores, hist_variant, hist_alpha, hist_beta, hist_bins,
                           hist_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
