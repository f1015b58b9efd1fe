#include "pae/evaluator.hpp"

#include <cctype>
#include <regex>

#include "pae/prompts.hpp"
#include "pae/solver.hpp"
#include "pae/util.hpp"

namespace pae::eval {
namespace {

void check_rate(double r, const char* name) {
  if (!(r >= 0.0 && r < 0.5)) {
    throw PreconditionError(std::string(name) + " must lie in [0, 0.5), got " + std::to_string(r));
  }
}

bool oracle_truth(const EvalRequest& request, const HiddenOutcome& hidden) {
  if (!hidden.world) throw PreconditionError("synthetic judge needs the hidden world");
  return web::oracle_verify(*hidden.world, request.task(), hidden.final_state);
}

}  // namespace

EvalRequest::EvalRequest(Task task, std::vector<web::Observation> observations, std::string answer)
    : task_(std::move(task)), answer_(std::move(answer)) {
  if (observations.size() > kMaxEvalObservations) {
    observations.erase(observations.begin(),
                       observations.end() - static_cast<std::ptrdiff_t>(kMaxEvalObservations));
  }
  observations_ = std::move(observations);
}

EvalRequest EvalRequest::from_trajectory(const Trajectory& trajectory) {
  return EvalRequest(trajectory.task, trajectory.observations(), trajectory.answer);
}

bool synthetic_judge(bool oracle_outcome, double fp_rate, double fn_rate, uint64_t seed) {
  check_rate(fp_rate, "fp_rate");
  check_rate(fn_rate, "fn_rate");
  Rng rng(seed);
  const double u = rng.uniform();
  return oracle_outcome ? !(u < fn_rate) : u < fp_rate;
}

EvalVerdict OracleJudge::judge(const EvalRequest& request, const HiddenOutcome& hidden) const {
  const bool ok = oracle_truth(request, hidden);
  return {ok, ok ? "oracle: verifier holds" : "oracle: verifier fails", EvaluatorKind::oracle};
}

SyntheticJudge::SyntheticJudge(double fp_rate, double fn_rate, uint64_t seed)
    : fp_(fp_rate), fn_(fn_rate), seed_(seed) {
  check_rate(fp_, "fp_rate");
  check_rate(fn_, "fn_rate");
}

EvalVerdict SyntheticJudge::judge(const EvalRequest& request, const HiddenOutcome& hidden) const {
  const bool truth = oracle_truth(request, hidden);
  const bool verdict = synthetic_judge(truth, fp_, fn_, derive_seed(seed_, hidden.episode_seed));
  std::string why = truth == verdict ? "agrees with oracle" : "noise flipped the oracle outcome";
  return {verdict, why, EvaluatorKind::synthetic};
}

bool parse_verdict(const std::string& reply) {
  const auto pos = reply.rfind("SUCCESS");
  if (pos == std::string::npos) throw JudgeError("judge reply has no SUCCESS / NOT SUCCESS verdict");
  std::size_t i = pos;
  while (i > 0 && std::isspace(static_cast<unsigned char>(reply[i - 1]))) --i;
  return !(i >= 3 && reply.compare(i - 3, 3, "NOT") == 0);
}

EvalVerdict RemoteJudge::judge(const EvalRequest& request, const HiddenOutcome&) const {
  std::string reply;
  {
    std::lock_guard lock(mu_);
    reply = backend_.complete(
        {{"system", prompts::evaluator_system_prompt()},
         {"user", prompts::evaluator_user_message(request.task().instruction, request.answer(),
                                                  request.final_observations())}});
  }
  return {parse_verdict(reply), reply, EvaluatorKind::outcome};
}

EvalVerdict evaluate_outcome(const EvalRequest& request, const OutcomeJudge& judge,
                             const HiddenOutcome& hidden) {
  return judge.judge(request, hidden);
}

SyntheticStepJudge::SyntheticStepJudge(const web::World& world, web::EpisodeConfig config,
                                       double generosity, uint64_t seed)
    : world_(world), config_(std::move(config)), generosity_(generosity), seed_(seed) {
  if (!(generosity_ >= 0.0 && generosity_ <= 1.0)) {
    throw PreconditionError("generosity must lie in [0, 1]");
  }
}

StepLabels SyntheticStepJudge::label(const Trajectory& trajectory) const {
  const auto path = solver::solve(world_, trajectory.task, config_).actions;
  StepLabels labels;
  bool on_path = true;
  for (std::size_t t = 0; t < trajectory.steps.size(); ++t) {
    on_path = on_path && t < path.size() && trajectory.steps[t].record.action == path[t];
    bool ok = on_path;
    if (!ok && generosity_ > 0.0) {
      Rng rng(derive_seed(seed_, trajectory.seed, t));
      ok = rng.bernoulli(generosity_);
    }
    labels.push_back(ok);
  }
  return labels;
}

StepLabels parse_step_labels(const std::string& reply, std::size_t n_steps) {
  static const std::regex line(R"(Step\s*(\d+)\s*:\s*(INCORRECT|CORRECT))", std::regex::icase);
  std::vector<int> seen(n_steps, -1);
  for (auto it = std::sregex_iterator(reply.begin(), reply.end(), line); it != std::sregex_iterator();
       ++it) {
    const std::size_t idx = std::stoul((*it)[1].str());
    if (idx < 1 || idx > n_steps) continue;
    seen[idx - 1] = iequals((*it)[2].str(), "CORRECT") ? 1 : 0;
  }
  StepLabels labels;
  for (std::size_t i = 0; i < n_steps; ++i) {
    if (seen[i] < 0) throw JudgeError("step judge reply has no label for step " + std::to_string(i + 1));
    labels.push_back(seen[i] == 1);
  }
  return labels;
}

StepLabels RemoteStepJudge::label(const Trajectory& trajectory) const {
  std::string reply;
  {
    std::lock_guard lock(mu_);
    reply = backend_.complete({{"user", prompts::step_judge_prompt(trajectory)}});
  }
  return parse_step_labels(reply, trajectory.steps.size());
}

StepLabels evaluate_steps(const Trajectory& trajectory, const StepJudge& judge) {
  auto labels = judge.label(trajectory);
  if (labels.size() != trajectory.steps.size()) throw JudgeError("step label count mismatch");
  return labels;
}

SyntheticVerifierJudge::SyntheticVerifierJudge(const web::World& world, double hallucination_rate,
                                               uint64_t seed)
    : world_(world), rate_(hallucination_rate), seed_(seed) {
  if (!(rate_ >= 0.0 && rate_ <= 1.0)) throw PreconditionError("hallucination_rate must lie in [0, 1]");
}

bool SyntheticVerifierJudge::hallucinates(const Task& task) const {
  Rng rng(derive_seed(seed_, hash_string(task.task_id)));
  return rng.uniform() < rate_;
}

web::VerifierProgram SyntheticVerifierJudge::generate(const Task& task) const {
  const web::SiteSpec& site = world_.site(task.site_id);
  if (hallucinates(task)) {
    std::string page = "made_up_" + std::to_string(hash_string(task.task_id) % 100000);
    while (site.find_page(page)) page += "_x";
    return web::PageIs{page};
  }
  if (!task.verifier_ref) throw PreconditionError("synthetic verifier judge needs a verifier_ref");
  auto it = site.verifiers.find(*task.verifier_ref);
  if (it == site.verifiers.end()) throw PreconditionError("unknown verifier " + *task.verifier_ref);
  return web::parse_verifier(it->second);
}

web::VerifierProgram parse_verifier_reply(const std::string& reply) {
  const auto pos = reply.rfind("Verifier:");
  if (pos == std::string::npos) throw JudgeError("reply has no 'Verifier:' line");
  auto end = reply.find('\n', pos);
  try {
    return web::parse_verifier(reply.substr(pos + 9, end == std::string::npos ? end : end - pos - 9));
  } catch (const web::VerifierSyntaxError& e) {
    throw JudgeError(std::string("unparseable verifier: ") + e.what());
  }
}

web::VerifierProgram RemoteVerifierJudge::generate(const Task& task) const {
  std::string reply;
  {
    std::lock_guard lock(mu_);
    reply = backend_.complete(
        {{"user", prompts::verifier_prompt(task.instruction, world_.site(task.site_id).display_name)}});
  }
  return parse_verifier_reply(reply);
}

web::VerifierProgram generate_verifier(const Task& task, const VerifierJudge& judge) {
  return judge.generate(task);
}

EvalVerdict evaluate_function(const web::VerifierProgram& program, const Task& task,
                              const web::WorldState& final_state) {
  const bool ok = web::evaluate_verifier(program, task.site_id, final_state);
  return {ok, web::format_verifier(program), EvaluatorKind::function};
}

}  // namespace pae::eval
