#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltrlab/datamodel.hpp"
#include "ltrlab/ranker.hpp"
#include "ltrlab/synthgen.hpp"

namespace ltrlab::il {

enum class Team : int { kA = 0, kB = 1 };

struct Pick {
  std::size_t item_index = 0;
  Team team = Team::kA;
};

// Team-draft interleaving of two rankings over the same candidate set:
// each round a fair coin decides which team picks first, then both
// teams append their highest-ranked not-yet-chosen item and get
// attribution for it. Throws when the candidate sets differ.
std::vector<Pick> team_draft(std::span<const std::size_t> ranking_a,
                             std::span<const std::size_t> ranking_b, std::uint64_t seed);

struct InterleaveReport {
  int n_sessions = 0;
  double atc_a = 0.0;  // team-credited add-to-cart-or-better counts
  double atc_b = 0.0;
  double pct_change = 0.0;  // B (variant) vs A (baseline)
  double t = 0.0;
  double p = 1.0;
  bool zero_variance = false;
};

// Simulated online experiment: sessions resample queries with
// replacement, interleave the two models' rankings, truncate to
// top_positions, run the cascade user model, and credit each
// add-to-cart-or-better outcome to the owning team. Significance comes
// from a paired t-test on per-session credit differences.
InterleaveReport run_interleaving_experiment(const ranker::TreeEnsemble& ranker_a,
                                             const ranker::TreeEnsemble& ranker_b,
                                             const data::Dataset& queries,
                                             const synth::UserModelParams& user, int n_sessions,
                                             std::uint64_t seed, int top_positions = 40);

}  // namespace ltrlab::il
