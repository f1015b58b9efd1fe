#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "pae/policy.hpp"
#include "pae/trajectory.hpp"
#include "pae/webworld.hpp"

namespace pae::rollout {

struct Rollout {
  Trajectory trajectory;
  web::WorldState final_state;  // hidden; for oracle and synthetic judges only
};

/// reset, then act/step until the episode is done. Step t acts with
/// derive_seed(seed, t).
Rollout run_episode(const web::World& world, const Task& task, const policy::Policy& policy,
                    const web::EpisodeConfig& config, uint64_t seed);

/// Re-runs a recorded trajectory's actions from reset and returns the final
/// hidden state. Episodes are deterministic, so this recovers what the judge
/// would have seen.
web::WorldState replay(const web::World& world, const Trajectory& trajectory,
                       const web::EpisodeConfig& config);

/// Calls fn(i) for i in [0, n) on `workers` threads. Callers write results
/// into slot i, so output order never depends on scheduling. The first
/// exception thrown by fn is rethrown after all threads stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace pae::rollout
