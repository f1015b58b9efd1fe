#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pae/evaluator.hpp"
#include "pae/harness.hpp"
#include "pae/policy.hpp"
#include "pae/rollout.hpp"
#include "pae/trajectory.hpp"
#include "pae/webworld.hpp"

namespace pae::trainer {

/// Which proxy reward drives the update.
enum class EvaluatorMode { outcome, step, function };

std::string_view to_string(EvaluatorMode mode);
EvaluatorMode evaluator_mode_from_string(std::string_view text);

struct TrainConfig {
  int iterations = 5;
  int rollouts_per_iteration = 2048;
  double temperature = 1.0;
  int epochs_per_iteration = 4;
  double learning_rate = 0.5;
  int batch_size = 8;
  int worker_count = 1;
  EvaluatorMode evaluator = EvaluatorMode::outcome;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  double generosity = 0.0;
  double hallucination_rate = 0.0;
  bool cot_enabled = true;
  uint64_t master_seed = 0;
  web::EpisodeConfig episode;

  /// Throws PreconditionError. iterations may be 0; every other count >= 1.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Missing keys keep their defaults; unknown keys are an error.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Proxy judges for one run, built from the config.
class Judges {
 public:
  Judges(const web::World& world, const TrainConfig& config);
  /// Fills verdict, terminal_reward and the last step's reward.
  void judge(rollout::Rollout& r) const;
  /// Step labels for the step-based mode.
  eval::StepLabels step_labels(const Trajectory& t) const;

 private:
  const web::World& world_;
  const TrainConfig& config_;
  eval::SyntheticJudge outcome_;
  eval::SyntheticStepJudge steps_;
  eval::SyntheticVerifierJudge functions_;
};

/// rollouts_per_iteration tasks drawn uniformly with replacement; episode e
/// runs with derive_seed(master_seed, iteration, e) and is judged in place.
std::vector<rollout::Rollout> collect_rollouts(const web::World& world, const std::vector<Task>& pool,
                                               const policy::Policy& policy,
                                               const TrainConfig& config, int iteration,
                                               const Judges& judges);

/// Trajectories with terminal_reward 1, in their original order.
std::vector<Trajectory> filter_successful(const std::vector<Trajectory>& trajectories);

/// Append-only trajectory store.
class ReplayBuffer {
 public:
  void append(Trajectory t);
  std::size_t size() const { return items_.size(); }
  const std::vector<Trajectory>& all() const { return items_; }
  std::vector<const Trajectory*> query(std::optional<int> iteration,
                                       std::optional<std::string> site,
                                       std::optional<int> reward) const;
  /// Fingerprints taken at insertion still match the stored trajectories.
  bool intact() const;

 private:
  std::vector<Trajectory> items_;
  std::vector<std::string> fingerprints_;
};

inline constexpr std::string_view kTrajectoriesFile = "trajectories.jsonl";

void append_trajectories_jsonl(const std::filesystem::path& path,
                               const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectories_jsonl(const std::filesystem::path& path);

struct TrainingResult {
  policy::PolicyParams params;
  std::vector<harness::MetricsRow> metrics;
  std::vector<harness::SplitResult> final_results;  // last held-out evaluation, per split
  ReplayBuffer buffer;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // persists buffer, params and metrics
  bool keep_buffer = true;
  std::function<void(const std::string&)> log;  // warnings and progress
};

/// The full loop. eval_splits[0] feeds heldout_success_oracle and
/// running_avg; later splits add "<name>_success" and "<name>_running_avg"
/// columns. Held-out episodes run greedily.
TrainingResult run_training(const web::World& world, const std::vector<Task>& pool,
                            const std::vector<harness::EvalSplit>& eval_splits,
                            const policy::PolicyParams& initial, const TrainConfig& config,
                            const RunOptions& options = {});

}  // namespace pae::trainer
