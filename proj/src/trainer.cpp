#include "pae/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "pae/util.hpp"

namespace pae::trainer {

std::string_view to_string(EvaluatorMode mode) {
  switch (mode) {
    case EvaluatorMode::outcome: return "outcome";
    case EvaluatorMode::step: return "step";
    case EvaluatorMode::function: return "function";
  }
  return "outcome";
}

EvaluatorMode evaluator_mode_from_string(std::string_view text) {
  if (text == "outcome") return EvaluatorMode::outcome;
  if (text == "step") return EvaluatorMode::step;
  if (text == "function") return EvaluatorMode::function;
  throw PreconditionError("unknown evaluator mode \"" + std::string(text) + "\"");
}

void TrainConfig::validate() const {
  if (iterations < 0) throw PreconditionError("iterations must be >= 0");
  if (rollouts_per_iteration < 1) throw PreconditionError("rollouts_per_iteration must be >= 1");
  if (epochs_per_iteration < 1) throw PreconditionError("epochs_per_iteration must be >= 1");
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  if (worker_count < 1) throw PreconditionError("worker_count must be >= 1");
  if (!(temperature > 0.0)) throw PreconditionError("temperature must be positive");
  if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be positive");
  if (!(fp_rate >= 0.0 && fp_rate < 0.5) || !(fn_rate >= 0.0 && fn_rate < 0.5)) {
    throw PreconditionError("fp_rate and fn_rate must lie in [0, 0.5)");
  }
  if (!(generosity >= 0.0 && generosity <= 1.0)) throw PreconditionError("generosity must lie in [0, 1]");
  if (!(hallucination_rate >= 0.0 && hallucination_rate <= 1.0)) {
    throw PreconditionError("hallucination_rate must lie in [0, 1]");
  }
  episode.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"schema_version", 1},
                      {"iterations", c.iterations},
                      {"rollouts_per_iteration", c.rollouts_per_iteration},
                      {"temperature", c.temperature},
                      {"epochs_per_iteration", c.epochs_per_iteration},
                      {"learning_rate", c.learning_rate},
                      {"batch_size", c.batch_size},
                      {"worker_count", c.worker_count},
                      {"evaluator", to_string(c.evaluator)},
                      {"fp_rate", c.fp_rate},
                      {"fn_rate", c.fn_rate},
                      {"generosity", c.generosity},
                      {"hallucination_rate", c.hallucination_rate},
                      {"cot_enabled", c.cot_enabled},
                      {"master_seed", c.master_seed},
                      {"horizon", c.episode.horizon},
                      {"viewport_rows", c.episode.viewport_rows},
                      {"scroll_step", c.episode.scroll_step},
                      {"google_enabled", c.episode.google_enabled}};
  if (c.episode.hub_site) j["hub_site"] = *c.episode.hub_site;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "schema_version", "iterations",  "rollouts_per_iteration", "temperature",
      "epochs_per_iteration", "learning_rate", "batch_size", "worker_count",
      "evaluator", "fp_rate", "fn_rate", "generosity", "hallucination_rate", "cot_enabled",
      "master_seed", "horizon", "viewport_rows", "scroll_step", "google_enabled", "hub_site"};
  if (!j.is_object()) throw PreconditionError("train config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw PreconditionError("unknown train config key \"" + k + "\"");
  }
  if (j.value("schema_version", 1) != 1) throw PreconditionError("unsupported train config schema_version");
  TrainConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.rollouts_per_iteration = j.value("rollouts_per_iteration", c.rollouts_per_iteration);
  c.temperature = j.value("temperature", c.temperature);
  c.epochs_per_iteration = j.value("epochs_per_iteration", c.epochs_per_iteration);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.worker_count = j.value("worker_count", c.worker_count);
  if (j.contains("evaluator")) c.evaluator = evaluator_mode_from_string(j["evaluator"].get<std::string>());
  c.fp_rate = j.value("fp_rate", c.fp_rate);
  c.fn_rate = j.value("fn_rate", c.fn_rate);
  c.generosity = j.value("generosity", c.generosity);
  c.hallucination_rate = j.value("hallucination_rate", c.hallucination_rate);
  c.cot_enabled = j.value("cot_enabled", c.cot_enabled);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.episode.horizon = j.value("horizon", c.episode.horizon);
  c.episode.viewport_rows = j.value("viewport_rows", c.episode.viewport_rows);
  c.episode.scroll_step = j.value("scroll_step", c.episode.scroll_step);
  c.episode.google_enabled = j.value("google_enabled", c.episode.google_enabled);
  if (j.contains("hub_site")) c.episode.hub_site = j["hub_site"].get<std::string>();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return train_config_from_json(nlohmann::json::parse(in));
}

Judges::Judges(const web::World& world, const TrainConfig& config)
    : world_(world),
      config_(config),
      outcome_(config.fp_rate, config.fn_rate, derive_seed(config.master_seed, 0x0c)),
      steps_(world, config.episode, config.generosity, derive_seed(config.master_seed, 0x5e)),
      functions_(world, config.hallucination_rate, derive_seed(config.master_seed, 0xf0)) {}

eval::StepLabels Judges::step_labels(const Trajectory& t) const {
  return eval::evaluate_steps(t, steps_);
}

void Judges::judge(rollout::Rollout& r) const {
  Trajectory& t = r.trajectory;
  switch (config_.evaluator) {
    case EvaluatorMode::outcome: {
      const eval::HiddenOutcome hidden{&world_, r.final_state, t.seed};
      t.verdict = eval::evaluate_outcome(eval::EvalRequest::from_trajectory(t), outcome_, hidden);
      break;
    }
    case EvaluatorMode::function: {
      const auto program = eval::generate_verifier(t.task, functions_);
      t.verdict = eval::evaluate_function(program, t.task, r.final_state);
      break;
    }
    case EvaluatorMode::step: {
      const auto labels = step_labels(t);
      const auto good = std::count(labels.begin(), labels.end(), true);
      const bool all = !labels.empty() && good == static_cast<long>(labels.size());
      t.verdict = {all,
                   std::to_string(good) + " of " + std::to_string(labels.size()) + " steps correct",
                   EvaluatorKind::step};
      break;
    }
  }
  t.terminal_reward = t.verdict.success ? 1 : 0;
  for (auto& s : t.steps) s.reward = 0;
  if (!t.steps.empty()) t.steps.back().reward = t.terminal_reward;
}

namespace {

// Carries the trajectory whose evaluation failed so the caller can persist it.
class EvaluationAborted : public std::runtime_error {
 public:
  EvaluationAborted(const std::string& what, Trajectory t)
      : std::runtime_error(what), trajectory(std::move(t)) {}
  Trajectory trajectory;
};

}  // namespace

std::vector<rollout::Rollout> collect_rollouts(const web::World& world, const std::vector<Task>& pool,
                                               const policy::Policy& policy,
                                               const TrainConfig& config, int iteration,
                                               const Judges& judges) {
  if (pool.empty()) throw PreconditionError("collect_rollouts: empty task pool");
  config.validate();
  const auto n = static_cast<std::size_t>(config.rollouts_per_iteration);
  std::vector<std::size_t> picks(n);
  Rng rng(derive_seed(config.master_seed, iteration, 0x7a5c));
  for (auto& p : picks) p = rng.below(pool.size());

  std::vector<rollout::Rollout> out(n);
  rollout::parallel_for(n, config.worker_count, [&](std::size_t e) {
    const uint64_t seed = derive_seed(config.master_seed, iteration, e);
    auto r = rollout::run_episode(world, pool[picks[e]], policy, config.episode, seed);
    r.trajectory.iteration = iteration;
    r.trajectory.episode_index = static_cast<int>(e);
    try {
      judges.judge(r);
    } catch (const std::exception& ex) {
      throw EvaluationAborted(std::string("evaluation failed for ") + r.trajectory.task.task_id +
                                  ": " + ex.what(),
                              r.trajectory);
    }
    out[e] = std::move(r);
  });
  return out;
}

std::vector<Trajectory> filter_successful(const std::vector<Trajectory>& trajectories) {
  std::vector<Trajectory> out;
  for (const auto& t : trajectories) {
    if (t.terminal_reward == 1) out.push_back(t);
  }
  return out;
}

void ReplayBuffer::append(Trajectory t) {
  fingerprints_.push_back(trajectory_fingerprint(t));
  items_.push_back(std::move(t));
}

std::vector<const Trajectory*> ReplayBuffer::query(std::optional<int> iteration,
                                                   std::optional<std::string> site,
                                                   std::optional<int> reward) const {
  std::vector<const Trajectory*> out;
  for (const auto& t : items_) {
    if (iteration && t.iteration != *iteration) continue;
    if (site && t.task.site_id != *site) continue;
    if (reward && t.terminal_reward != *reward) continue;
    out.push_back(&t);
  }
  return out;
}

bool ReplayBuffer::intact() const {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (trajectory_fingerprint(items_[i]) != fingerprints_[i]) return false;
  }
  return true;
}

void append_trajectories_jsonl(const std::filesystem::path& path,
                               const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : trajectories) out << to_json(t).dump() << '\n';
}

std::vector<Trajectory> read_trajectories_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(trajectory_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::vector<policy::TrainingPair> pairs_from_labeled_steps(const Trajectory& t,
                                                           const eval::StepLabels& labels, bool cot,
                                                           bool google) {
  std::vector<policy::TrainingPair> out;
  std::vector<TrajectoryStep> prior;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    if (labels[i]) {
      const auto in = policy::make_input(t.task, t.steps[i].observation, prior, google);
      if (auto p = policy::make_pair(in, t.steps[i].record.action, cot)) out.push_back(std::move(*p));
    }
    prior.push_back(t.steps[i]);
  }
  return out;
}

}  // namespace

TrainingResult run_training(const web::World& world, const std::vector<Task>& pool,
                            const std::vector<harness::EvalSplit>& eval_splits,
                            const policy::PolicyParams& initial, const TrainConfig& config,
                            const RunOptions& options) {
  config.validate();
  initial.validate();
  TrainingResult result;
  result.params = initial;
  if (config.iterations == 0) return result;
  if (pool.empty()) throw PreconditionError("run_training: empty task pool");

  // Held-out tasks must never be trained on.
  std::set<std::string> train_text;
  for (const auto& t : pool) train_text.insert(t.site_id + "\n" + normalize_text(t.instruction));
  for (const auto& split : eval_splits) {
    if (split.name == harness::SplitName::seen_tasks) continue;
    for (const auto& t : split.tasks) {
      if (train_text.contains(t.site_id + "\n" + normalize_text(t.instruction))) {
        throw PreconditionError("held-out task " + t.task_id + " also appears in the training pool");
      }
    }
  }

  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    std::filesystem::remove(*options.out_dir / kTrajectoriesFile);
  }

  policy::PolicyParams params = initial;
  params.temperature = config.temperature;
  params.cot_enabled = config.cot_enabled;
  const Judges judges(world, config);
  std::vector<double> running(eval_splits.size(), 0.0);

  for (int k = 1; k <= config.iterations; ++k) {
    const policy::LearnablePolicy sampler(params, false);
    std::vector<rollout::Rollout> rollouts;
    try {
      rollouts = collect_rollouts(world, pool, sampler, config, k, judges);
    } catch (const EvaluationAborted& e) {
      if (options.out_dir) {
        std::ofstream(*options.out_dir / "failed_trajectory.json") << to_json(e.trajectory).dump(2);
      }
      throw;
    }

    std::vector<Trajectory> trajectories;
    trajectories.reserve(rollouts.size());
    for (auto& r : rollouts) trajectories.push_back(std::move(r.trajectory));
    const auto successful = filter_successful(trajectories);

    const policy::UpdateConfig update{config.learning_rate, config.epochs_per_iteration,
                                      config.batch_size, derive_seed(config.master_seed, k, 0xb7),
                                      config.episode.google_enabled};
    if (config.evaluator == EvaluatorMode::step) {
      std::vector<policy::TrainingPair> pairs;
      for (const auto& t : trajectories) {
        auto p = pairs_from_labeled_steps(t, judges.step_labels(t), params.cot_enabled,
                                          config.episode.google_enabled);
        pairs.insert(pairs.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
      }
      if (pairs.empty()) {
        log("iteration " + std::to_string(k) + ": no step judged correct, skipping update");
      } else {
        params = policy::update_from_pairs(params, pairs, update);
      }
    } else if (successful.empty()) {
      log("iteration " + std::to_string(k) + ": no successful rollouts, skipping update");
    } else {
      params = policy::update_from_demos(params, successful, update);
    }

    const policy::LearnablePolicy greedy(params, true);
    result.final_results.clear();
    harness::MetricsRow row;
    row.iteration = k;
    row.rollouts = static_cast<int>(trajectories.size());
    row.successes_kept = static_cast<int>(successful.size());
    row.train_success_proxy = static_cast<double>(successful.size()) / trajectories.size();
    for (std::size_t s = 0; s < eval_splits.size(); ++s) {
      auto res = harness::evaluate_policy(world, eval_splits[s], greedy, config.episode,
                                          derive_seed(config.master_seed, 0xe7a1, s),
                                          config.worker_count);
      running[s] += res.average();
      const double avg = running[s] / k;
      if (s == 0) {
        row.heldout_success_oracle = res.average();
        row.running_avg = avg;
      } else {
        row.extra.emplace_back(res.name + "_success", res.average());
        row.extra.emplace_back(res.name + "_running_avg", avg);
      }
      result.final_results.push_back(std::move(res));
    }
    result.metrics.push_back(row);
    log("iteration " + std::to_string(k) + ": proxy " + std::to_string(row.train_success_proxy) +
        ", held-out " + std::to_string(row.heldout_success_oracle) + ", running avg " +
        std::to_string(row.running_avg));

    if (options.out_dir) {
      append_trajectories_jsonl(*options.out_dir / kTrajectoriesFile, trajectories);
      policy::save_params(*options.out_dir / ("params_iter" + std::to_string(k) + ".bin"), params);
      std::ofstream(*options.out_dir / "metrics.csv", std::ios::binary | std::ios::trunc)
          << harness::metrics_csv(result.metrics);
    }
    if (options.keep_buffer) {
      for (auto& t : trajectories) result.buffer.append(std::move(t));
    }
  }

  result.params = params;
  if (options.out_dir) {
    policy::save_params(*options.out_dir / "params_final.bin", params);
    std::ofstream(*options.out_dir / "params_final.json", std::ios::trunc)
        << policy::params_to_json(params).dump(2) << '\n';
  }
  return result;
}

}  // namespace pae::trainer
