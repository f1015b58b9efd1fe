#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pae/action.hpp"
#include "pae/task.hpp"
#include "pae/webworld.hpp"

namespace pae::solver {

/// What the scripted solver is trying to reach for a verifiable task.
struct Goal {
  std::string target_page;
  // Element on the target page to click once there (session tasks).
  std::optional<std::string> element_id;
  // Answer to submit once the goal state is reached.
  std::string answer = "done";
};

/// Resolves the task's verifier into a goal. Throws std::invalid_argument
/// for tasks without a verifier or whose target cannot be located.
Goal resolve_goal(const web::World& world, const Task& task);

/// State-aware next action: shortest click/search path to the goal page,
/// scrolling as needed, then the goal click and the answer.
actions::Action next_action(const web::World& world, const Task& task, const Goal& goal,
                            const web::WorldState& state, const web::EpisodeConfig& config);

struct Solution {
  std::vector<actions::Action> actions;
  web::WorldState final_state;
  bool verified = false;
};

/// Runs the solver from reset until the episode ends.
Solution solve(const web::World& world, const Task& task, const web::EpisodeConfig& config);

}  // namespace pae::solver
