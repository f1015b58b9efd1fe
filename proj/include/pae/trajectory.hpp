#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pae/action.hpp"
#include "pae/task.hpp"
#include "pae/webworld.hpp"

namespace pae {

enum class EvaluatorKind { outcome, step, function, oracle, synthetic };

std::string_view to_string(EvaluatorKind kind);
EvaluatorKind evaluator_kind_from_string(std::string_view text);

struct EvalVerdict {
  bool success = false;
  std::string rationale;
  EvaluatorKind evaluator_kind = EvaluatorKind::synthetic;
  bool operator==(const EvalVerdict&) const = default;
};

/// Error categories used for manual annotation only; never filled in by code.
enum class ErrorTag {
  low_level_skill_missing,
  hallucination,
  visual_understanding,
  repeated_actions,
  timeout,
  other,
};

struct TrajectoryStep {
  web::Observation observation;  // what the policy saw before acting
  actions::ActionRecord record;
  int reward = 0;  // 0 except possibly at the terminal step
  bool invalid_action = false;
  bool operator==(const TrajectoryStep& o) const {
    return observation == o.observation && record.thought == o.record.thought &&
           record.action == o.record.action && record.raw_text == o.record.raw_text &&
           reward == o.reward && invalid_action == o.invalid_action;
  }
};

struct Trajectory {
  Task task;
  std::vector<TrajectoryStep> steps;
  web::Observation final_observation;
  std::string answer;  // empty when the episode timed out
  bool answered = false;
  int terminal_reward = 0;
  EvalVerdict verdict;
  uint64_t seed = 0;
  int iteration = 0;
  int episode_index = 0;
  double wall_time_ms = 0.0;
  std::optional<ErrorTag> error_tag;

  /// Observations after each step, oldest first: the pre-action observation
  /// of every step followed by the final one.
  std::vector<web::Observation> observations() const;
};

inline constexpr int kTrajectorySchemaVersion = 1;

nlohmann::json to_json(const web::Observation& obs);
web::Observation observation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Task& task);
Task task_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

/// Deterministic content hash (excludes wall time) for append-only checks.
std::string trajectory_fingerprint(const Trajectory& t);

}  // namespace pae
