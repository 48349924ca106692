#include "ltrlab/interleave.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "ltrlab/eval.hpp"
#include "ltrlab/rng.hpp"

namespace ltrlab::il {

std::vector<Pick> team_draft(std::span<const std::size_t> ranking_a,
                             std::span<const std::size_t> ranking_b, std::uint64_t seed) {
  if (ranking_a.size() != ranking_b.size())
    throw std::invalid_argument("team_draft: rankings differ in length");
  {
    std::vector<std::size_t> sa(ranking_a.begin(), ranking_a.end());
    std::vector<std::size_t> sb(ranking_b.begin(), ranking_b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) throw std::invalid_argument("team_draft: rankings cover different candidate sets");
    if (std::adjacent_find(sa.begin(), sa.end()) != sa.end())
      throw std::invalid_argument("team_draft: duplicate items in ranking");
  }

  Rng rng(seed);
  const std::size_t n = ranking_a.size();
  std::vector<char> chosen(n == 0 ? 0 : *std::max_element(ranking_a.begin(), ranking_a.end()) + 1, 0);
  std::vector<Pick> out;
  out.reserve(n);

  std::size_t cursor_a = 0, cursor_b = 0;
  auto pick_from = [&](std::span<const std::size_t> ranking, std::size_t& cursor, Team team) {
    while (cursor < ranking.size() && chosen[ranking[cursor]]) ++cursor;
    if (cursor == ranking.size()) return;
    chosen[ranking[cursor]] = 1;
    out.push_back({ranking[cursor], team});
  };

  while (out.size() < n) {
    const bool a_first = rng.bernoulli(0.5);
    if (a_first) {
      pick_from(ranking_a, cursor_a, Team::kA);
      pick_from(ranking_b, cursor_b, Team::kB);
    } else {
      pick_from(ranking_b, cursor_b, Team::kB);
      pick_from(ranking_a, cursor_a, Team::kA);
    }
  }
  return out;
}

InterleaveReport run_interleaving_experiment(const ranker::TreeEnsemble& ranker_a,
                                             const ranker::TreeEnsemble& ranker_b,
                                             const data::Dataset& queries,
                                             const synth::UserModelParams& user, int n_sessions,
                                             std::uint64_t seed, int top_positions) {
  user.validate();
  if (n_sessions < 1) throw std::invalid_argument("run_interleaving_experiment: n_sessions must be >= 1");
  if (top_positions < 1)
    throw std::invalid_argument("run_interleaving_experiment: top_positions must be >= 1");
  if (queries.groups().empty())
    throw std::invalid_argument("run_interleaving_experiment: empty query pool");
  if (!queries.has_latent())
    throw std::invalid_argument("run_interleaving_experiment: query pool lacks latent truth");

  // Rankings are deterministic per (model, query); precompute them once
  // so sessions only pay for the draft and the user simulation.
  const std::size_t n_groups = queries.groups().size();
  std::vector<std::vector<std::size_t>> orders_a(n_groups), orders_b(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    orders_a[g] = ranker::rank_group(ranker_a, queries.groups()[g], queries.schema());
    orders_b[g] = ranker::rank_group(ranker_b, queries.groups()[g], queries.schema());
  }

  Rng session_picker(derive_seed(seed, "session-queries"));
  std::vector<double> deltas;
  deltas.reserve(n_sessions);
  double total_a = 0.0, total_b = 0.0;

  for (int s = 0; s < n_sessions; ++s) {
    const std::size_t g = session_picker.uniform_index(n_groups);
    const auto& group = queries.groups()[g];
    const std::uint64_t session_seed = derive_seed(seed, static_cast<std::uint64_t>(s));

    auto picks = team_draft(orders_a[g], orders_b[g], derive_seed(session_seed, "draft"));
    if (picks.size() > static_cast<std::size_t>(top_positions))
      picks.resize(static_cast<std::size_t>(top_positions));

    std::vector<synth::SessionItem> ranking(picks.size());
    for (std::size_t p = 0; p < picks.size(); ++p) {
      const auto& latent = *group.items[picks[p].item_index].latent;
      ranking[p] = {latent.rho, latent.pi};
    }
    const auto outcomes = simulate_session(ranking, user, derive_seed(session_seed, "user"));

    double credit_a = 0.0, credit_b = 0.0;
    for (std::size_t p = 0; p < picks.size(); ++p) {
      if (outcomes[p] >= data::EngagementOutcome::kAddedToCart)
        (picks[p].team == Team::kA ? credit_a : credit_b) += 1.0;
    }
    total_a += credit_a;
    total_b += credit_b;
    deltas.push_back(credit_b - credit_a);
  }

  InterleaveReport report;
  report.n_sessions = n_sessions;
  report.atc_a = total_a;
  report.atc_b = total_b;
  report.pct_change = total_a > 0.0 ? 100.0 * (total_b - total_a) / total_a : 0.0;
  const auto test = eval::paired_t_test(deltas);
  report.t = test.t;
  report.p = test.p;
  report.zero_variance = test.zero_variance;
  return report;
}

}  // namespace ltrlab::il
