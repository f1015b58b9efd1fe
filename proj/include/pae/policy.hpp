#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pae/action.hpp"
#include "pae/backend.hpp"
#include "pae/task.hpp"
#include "pae/trajectory.hpp"
#include "pae/webworld.hpp"

namespace pae::policy {

enum class PolicyKind { random, scripted_solver, learnable, remote };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view text);

/// Summary of one earlier step: where the agent was and what it did.
struct HistoryEntry {
  std::string page_title;
  std::string caption;  // caption of the element the action targeted, if any
  actions::ActionRecord record;
};

struct PolicyInput {
  Task task;
  web::Observation observation;
  std::vector<HistoryEntry> history;  // oldest first, at most one per prior step
  int step_index = 0;
  bool google_enabled = false;
};

/// Rebuilds the input the agent saw before `prior.size()`-th step.
PolicyInput make_input(const Task& task, const web::Observation& observation,
                       const std::vector<TrajectoryStep>& prior, bool google_enabled = false);

/// Every action the desk policies may choose from: a click per non-textbox
/// element, a Type per task keyword per textbox, window scrolls, Wait,
/// GoBack, Google when enabled, ANSWER "done" and one ANSWER per visible
/// "Key: Value" line. Never empty.
std::vector<actions::Action> candidate_actions(const PolicyInput& input);

/// Binary features of one candidate. cot adds the abstract match features.
std::vector<std::string> candidate_features(const PolicyInput& input, const actions::Action& action,
                                            bool cot);

struct PolicyParams {
  std::unordered_map<std::string, double> weights;
  double temperature = 1.0;
  bool cot_enabled = true;

  double weight(const std::string& feature) const;
  /// Throws PreconditionError on a non-positive temperature or non-finite weight.
  void validate() const;
  bool operator==(const PolicyParams&) const = default;
};

struct Scored {
  std::vector<actions::Action> candidates;
  std::vector<std::vector<std::string>> features;
  std::vector<double> probs;
};

Scored score(const PolicyParams& params, const PolicyInput& input);

/// "I will <verb> element <label> (<caption>) because the task mentions <keyword>"
std::string make_thought(const PolicyInput& input, const actions::Action& action);

struct PolicyOutput {
  actions::ActionRecord record;
  bool parse_failed = false;  // remote reply did not parse; record holds a placeholder Wait
  std::string error;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  /// Same (input, seed) gives the same output.
  virtual PolicyOutput act(const PolicyInput& input, uint64_t seed) const = 0;
};

class RandomPolicy : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::random; }
  PolicyOutput act(const PolicyInput& input, uint64_t seed) const override;
};

/// Replays the scripted solver's plan for the task; valid only on tasks
/// with a verifier reference.
class ScriptedPolicy : public Policy {
 public:
  ScriptedPolicy(const web::World& world, web::EpisodeConfig config)
      : world_(world), config_(std::move(config)) {}
  PolicyKind kind() const override { return PolicyKind::scripted_solver; }
  PolicyOutput act(const PolicyInput& input, uint64_t seed) const override;

 private:
  const web::World& world_;
  web::EpisodeConfig config_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::vector<actions::Action>> plans_;
};

/// Linear softmax over candidate features. greedy takes the argmax (first
/// candidate on ties) instead of sampling.
class LearnablePolicy : public Policy {
 public:
  explicit LearnablePolicy(PolicyParams params, bool greedy = false);
  PolicyKind kind() const override { return PolicyKind::learnable; }
  PolicyOutput act(const PolicyInput& input, uint64_t seed) const override;
  const PolicyParams& params() const { return params_; }
  bool greedy() const { return greedy_; }

 private:
  PolicyParams params_;
  bool greedy_;
};

class RemotePolicy : public Policy {
 public:
  explicit RemotePolicy(remote::ChatBackend& backend) : backend_(backend) {}
  PolicyKind kind() const override { return PolicyKind::remote; }
  PolicyOutput act(const PolicyInput& input, uint64_t seed) const override;

 private:
  remote::ChatBackend& backend_;
  mutable std::mutex mu_;
};

/// One imitation target: the candidates' features and which one was taken.
struct TrainingPair {
  std::vector<std::vector<std::string>> candidate_features;
  std::size_t chosen = 0;
};

/// nullopt when the taken action is not among the candidates.
std::optional<TrainingPair> make_pair(const PolicyInput& input, const actions::Action& taken,
                                      bool cot);

/// Mean negative log-likelihood of the chosen candidates.
double nll(const PolicyParams& params, const std::vector<TrainingPair>& pairs);

/// Gradient of nll() with respect to every touched weight:
/// -(x(chosen) - sum_a p(a) x(a)) / temperature, averaged over pairs.
std::map<std::string, double> nll_gradient(const PolicyParams& params,
                                           const std::vector<TrainingPair>& pairs);

struct UpdateConfig {
  double learning_rate = 0.5;
  int epochs = 4;
  int batch_size = 8;  // <= 0 means full batch
  uint64_t seed = 0;
  bool google_enabled = false;
};

/// Mini-batch SGD on the pairs for `epochs` passes.
PolicyParams update_from_pairs(const PolicyParams& params, const std::vector<TrainingPair>& pairs,
                               const UpdateConfig& config);

/// Imitates every step of the given successful trajectories. Throws
/// PreconditionError if any has terminal_reward != 1.
PolicyParams update_from_demos(const PolicyParams& params,
                               const std::vector<Trajectory>& successful,
                               const UpdateConfig& config);

/// Pairs for every step of a trajectory (steps whose action is not a
/// candidate, such as unparsed remote output, are skipped).
std::vector<TrainingPair> pairs_from_trajectory(const Trajectory& trajectory, bool cot,
                                                bool google_enabled = false);

inline constexpr uint32_t kParamsFormatVersion = 1;

/// "PAEP" magic, u32 version, then tagged little-endian fields; weights are
/// written in key order so equal params give equal bytes.
std::string params_to_bytes(const PolicyParams& params);
PolicyParams params_from_bytes(std::string_view bytes);
void save_params(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_params(const std::filesystem::path& path);

nlohmann::json params_to_json(const PolicyParams& params);

}  // namespace pae::policy
