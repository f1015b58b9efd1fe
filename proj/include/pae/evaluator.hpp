#pragma once

#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "pae/backend.hpp"
#include "pae/task.hpp"
#include "pae/trajectory.hpp"
#include "pae/verifier.hpp"
#include "pae/webworld.hpp"

namespace pae::eval {

inline constexpr std::size_t kMaxEvalObservations = 3;

/// What a judge gets to see: the task, the last few observations and the
/// agent's answer. Longer observation lists are cut to the last three.
class EvalRequest {
 public:
  EvalRequest(Task task, std::vector<web::Observation> observations, std::string answer);
  static EvalRequest from_trajectory(const Trajectory& trajectory);

  const Task& task() const { return task_; }
  const std::vector<web::Observation>& final_observations() const { return observations_; }
  const std::string& answer() const { return answer_; }

 private:
  Task task_;
  std::vector<web::Observation> observations_;
  std::string answer_;
};

/// Ground truth behind an episode. Only synthetic and oracle judges read it.
struct HiddenOutcome {
  const web::World* world = nullptr;
  web::WorldState final_state;
  uint64_t episode_seed = 0;
};

/// Raised when a remote judge reply carries no usable verdict.
class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flips a true outcome to false with probability fn_rate and a false one to
/// true with probability fp_rate. Rates must lie in [0, 0.5).
bool synthetic_judge(bool oracle_outcome, double fp_rate, double fn_rate, uint64_t seed);

class OutcomeJudge {
 public:
  virtual ~OutcomeJudge() = default;
  virtual EvalVerdict judge(const EvalRequest& request, const HiddenOutcome& hidden) const = 0;
};

class OracleJudge : public OutcomeJudge {
 public:
  EvalVerdict judge(const EvalRequest& request, const HiddenOutcome& hidden) const override;
};

/// Oracle truth XOR seeded noise.
class SyntheticJudge : public OutcomeJudge {
 public:
  SyntheticJudge(double fp_rate, double fn_rate, uint64_t seed);
  EvalVerdict judge(const EvalRequest& request, const HiddenOutcome& hidden) const override;

 private:
  double fp_;
  double fn_;
  uint64_t seed_;
};

/// Sends the evaluator prompt and reads the final SUCCESS / NOT SUCCESS.
class RemoteJudge : public OutcomeJudge {
 public:
  explicit RemoteJudge(remote::ChatBackend& backend) : backend_(backend) {}
  EvalVerdict judge(const EvalRequest& request, const HiddenOutcome& hidden) const override;

 private:
  remote::ChatBackend& backend_;
  mutable std::mutex mu_;
};

/// Last SUCCESS token decides; "NOT SUCCESS" is a failure. Throws JudgeError
/// when neither appears.
bool parse_verdict(const std::string& reply);

EvalVerdict evaluate_outcome(const EvalRequest& request, const OutcomeJudge& judge,
                             const HiddenOutcome& hidden);

using StepLabels = std::vector<bool>;

class StepJudge {
 public:
  virtual ~StepJudge() = default;
  virtual StepLabels label(const Trajectory& trajectory) const = 0;
};

/// A step is correct when the trajectory so far matches the scripted solver's
/// actions from reset, or with probability `generosity` otherwise.
class SyntheticStepJudge : public StepJudge {
 public:
  SyntheticStepJudge(const web::World& world, web::EpisodeConfig config, double generosity,
                     uint64_t seed);
  StepLabels label(const Trajectory& trajectory) const override;

 private:
  const web::World& world_;
  web::EpisodeConfig config_;
  double generosity_;
  uint64_t seed_;
};

/// Reads "Step <i>: CORRECT|INCORRECT" lines.
class RemoteStepJudge : public StepJudge {
 public:
  explicit RemoteStepJudge(remote::ChatBackend& backend) : backend_(backend) {}
  StepLabels label(const Trajectory& trajectory) const override;

 private:
  remote::ChatBackend& backend_;
  mutable std::mutex mu_;
};

StepLabels parse_step_labels(const std::string& reply, std::size_t n_steps);

StepLabels evaluate_steps(const Trajectory& trajectory, const StepJudge& judge);

class VerifierJudge {
 public:
  virtual ~VerifierJudge() = default;
  virtual web::VerifierProgram generate(const Task& task) const = 0;
};

/// The task's true verifier, or with probability hallucination_rate (seeded
/// by task id) a page check against a page the site does not have.
class SyntheticVerifierJudge : public VerifierJudge {
 public:
  SyntheticVerifierJudge(const web::World& world, double hallucination_rate, uint64_t seed);
  web::VerifierProgram generate(const Task& task) const override;
  bool hallucinates(const Task& task) const;

 private:
  const web::World& world_;
  double rate_;
  uint64_t seed_;
};

class RemoteVerifierJudge : public VerifierJudge {
 public:
  RemoteVerifierJudge(const web::World& world, remote::ChatBackend& backend)
      : world_(world), backend_(backend) {}
  web::VerifierProgram generate(const Task& task) const override;

 private:
  const web::World& world_;
  remote::ChatBackend& backend_;
  mutable std::mutex mu_;
};

/// Extracts the program from a "Verifier: <program>" line. Throws JudgeError.
web::VerifierProgram parse_verifier_reply(const std::string& reply);

web::VerifierProgram generate_verifier(const Task& task, const VerifierJudge& judge);

/// Runs a generated program against the hidden final state.
EvalVerdict evaluate_function(const web::VerifierProgram& program, const Task& task,
                              const web::WorldState& final_state);

}  // namespace pae::eval
