#include "pae/rollout.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "pae/util.hpp"

namespace pae::rollout {

Rollout run_episode(const web::World& world, const Task& task, const policy::Policy& policy,
                    const web::EpisodeConfig& config, uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  auto [state, obs] = web::reset(world, task.site_id, task, config, seed);
  Rollout out;
  Trajectory& t = out.trajectory;
  t.task = task;
  t.seed = seed;
  while (!web::is_terminal(state, config)) {
    const auto input = policy::make_input(task, obs, t.steps, config.google_enabled);
    auto act = policy.act(input, derive_seed(seed, state.step_count));
    auto r = act.parse_failed ? web::step_unparsed(world, state, config)
                              : web::step(world, state, act.record.action, config);
    t.steps.push_back({std::move(obs), std::move(act.record), 0, r.invalid_action});
    state = std::move(r.state);
    obs = std::move(r.observation);
  }
  t.final_observation = std::move(obs);
  t.answered = state.answered.has_value();
  t.answer = state.answered.value_or("");
  t.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  out.final_state = std::move(state);
  return out;
}

web::WorldState replay(const web::World& world, const Trajectory& trajectory,
                       const web::EpisodeConfig& config) {
  auto state = web::reset(world, trajectory.task.site_id, trajectory.task, config, trajectory.seed).state;
  for (const auto& s : trajectory.steps) {
    if (web::is_terminal(state, config)) break;
    state = web::step(world, state, s.record.action, config).state;
  }
  return state;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers < 1) throw PreconditionError("worker count must be >= 1");
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  for (std::size_t w = 0; w < count; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pae::rollout
