// Acceptance checks, one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "pae/action.hpp"
#include "pae/harness.hpp"
#include "pae/policy.hpp"
#include "pae/proposer.hpp"
#include "pae/rollout.hpp"
#include "pae/trainer.hpp"
#include "pae/util.hpp"
#include "pae/webworld.hpp"

namespace fs = std::filesystem;
using namespace pae;

namespace {

constexpr uint64_t kSeed = 42;

const web::World& world() {
  static const web::World w =
      web::load_world_or_throw(fs::path(PAE_SOURCE_DIR) / "data/worlds/threeshop.json");
  return w;
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100 * x);
  return buf;
}

struct Experiment {
  harness::Splits splits;
  double baseline_seen = 0;
  double baseline_unseen = 0;
};

const Experiment& experiment() {
  static const Experiment e = [] {
    Experiment x;
    const auto pool = proposer::propose_world(world(), ContextKind::user_demos, 300, kSeed).tasks;
    x.splits = harness::make_splits(world(), pool, 0.2, {}, kSeed);
    const policy::RandomPolicy random;
    const web::EpisodeConfig cfg;
    x.baseline_seen =
        harness::evaluate_policy(world(), x.splits.eval[0], random, cfg, derive_seed(kSeed, 0xba5e)).average();
    x.baseline_unseen =
        harness::evaluate_policy(world(), x.splits.eval[1], random, cfg, derive_seed(kSeed, 0xba5e)).average();
    return x;
  }();
  return e;
}

trainer::TrainConfig base_config() {
  trainer::TrainConfig c;
  c.iterations = 5;
  c.rollouts_per_iteration = 256;
  c.master_seed = kSeed;
  c.worker_count = 1;
  return c;
}

struct RunSummary {
  double seen_running = 0;
  double seen_final = 0;
  double unseen_running = 0;
  double unseen_final = 0;
  double seconds = 0;
};

RunSummary train(const trainer::TrainConfig& c) {
  const auto& e = experiment();
  const auto start = std::chrono::steady_clock::now();
  trainer::RunOptions opts;
  opts.keep_buffer = false;
  const auto r = trainer::run_training(world(), e.splits.train, e.splits.eval, {}, c, opts);
  RunSummary s;
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& last = r.metrics.back();
  s.seen_running = last.running_avg;
  s.seen_final = last.heldout_success_oracle;
  for (const auto& [name, v] : last.extra) {
    if (name == "unseen_tasks_success") s.unseen_final = v;
    if (name == "unseen_tasks_running_avg") s.unseen_running = v;
  }
  return s;
}

struct Outcome {
  bool pass;
  std::string detail;
};

// ---- criteria ----

Outcome c1() {
  const auto& e = experiment();
  const auto s = train(base_config());
  const bool ok = e.baseline_seen < 0.15 && s.seen_running >= 0.60 &&
                  s.unseen_final - e.baseline_unseen >= 0.30 && s.seconds <= 120;
  return {ok, "random baseline seen " + pct(e.baseline_seen) + " / unseen " + pct(e.baseline_unseen) +
                  "; final running avg seen " + pct(s.seen_running) + ", unseen final " +
                  pct(s.unseen_final) + "; " + std::to_string(s.seconds) + " s"};
}

Outcome c2() {
  const auto& e = experiment();
  auto c = base_config();
  c.fp_rate = c.fn_rate = 0.1;
  const auto s = train(c);
  const double gain = s.seen_final - e.baseline_seen;
  return {gain >= 0.20 && s.unseen_final - e.baseline_unseen >= 0.20,
          "fp=fn=0.1: seen final " + pct(s.seen_final) + " (+" + pct(gain) + "), unseen final " +
              pct(s.unseen_final)};
}

Outcome c3() {
  auto c = base_config();
  const auto outcome = train(c);
  c.evaluator = trainer::EvaluatorMode::function;
  c.hallucination_rate = 0.3;
  const auto function = train(c);
  c = base_config();
  c.evaluator = trainer::EvaluatorMode::step;
  c.generosity = 0.3;
  const auto step = train(c);
  return {outcome.seen_final >= function.seen_final && outcome.seen_final > step.seen_final,
          "final held-out: outcome " + pct(outcome.seen_final) + ", function " +
              pct(function.seen_final) + ", step " + pct(step.seen_final)};
}

Outcome c4() {
  auto c = base_config();
  const auto with = train(c);
  c.cot_enabled = false;
  const auto without = train(c);
  return {with.unseen_final >= without.unseen_final,
          "final unseen success: cot " + pct(with.unseen_final) + ", no cot " + pct(without.unseen_final)};
}

Outcome c5() {
  const auto& e = experiment();
  auto c = base_config();
  c.iterations = 4;
  c.rollouts_per_iteration = 250;
  const auto r = trainer::run_training(world(), e.splits.train, e.splits.eval, {}, c);
  const auto& all = r.buffer.all();
  bool ok = all.size() == 1000 && r.buffer.intact();
  int kept = 0;
  for (const auto& t : all) {
    ok &= t.terminal_reward == 0 || t.terminal_reward == 1;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const int rw = t.steps[i].reward;
      ok &= rw == 0 || rw == 1;
      if (i + 1 < t.steps.size()) ok &= rw == 0;
    }
    if (!t.steps.empty()) ok &= t.steps.back().reward == t.terminal_reward;
  }
  const auto filtered = trainer::filter_successful(all);
  for (const auto& t : filtered) {
    ok &= t.terminal_reward == 1;
    ++kept;
  }
  ok &= kept == static_cast<int>(std::count_if(all.begin(), all.end(),
                                               [](const Trajectory& t) { return t.terminal_reward == 1; }));
  // Training on anything but successes is refused outright.
  bool refused = false;
  for (const auto& t : all) {
    if (t.terminal_reward != 1) {
      try {
        policy::update_from_demos({}, {t}, {});
      } catch (const PreconditionError&) {
        refused = true;
      }
      break;
    }
  }
  ok &= refused;
  return {ok, std::to_string(all.size()) + " trajectories, " + std::to_string(kept) +
                  " kept for cloning, failed demos rejected: " + (refused ? "yes" : "no")};
}

Outcome c6() {
  std::ifstream in(fs::path(PAE_SOURCE_DIR) / "tests/data/action_golden.jsonl");
  int cases = 0, failures = 0;
  std::set<std::string> quoted = {"Click [7]", "Type [8]; CMU", "ANSWER; 06516", "Scroll [WINDOW]; down"};
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    ++cases;
    const auto c = nlohmann::json::parse(line);
    const std::string input = c["input"];
    quoted.erase(input);
    const bool full = c["mode"] == "output";
    try {
      std::string canonical;
      std::string thought;
      if (full) {
        const auto rec = actions::parse_agent_output(input);
        canonical = actions::format_action(rec.action);
        thought = rec.thought;
      } else {
        canonical = actions::format_action(actions::parse_action(input));
      }
      if (c.contains("error") || canonical != c["canonical"].get<std::string>() ||
          (full && thought != c["thought"].get<std::string>())) {
        ++failures;
      }
    } catch (const actions::ActionParseError& err) {
      if (!c.contains("error") || c["error"].get<std::string>() != actions::to_string(err.kind())) ++failures;
    }
  }

  Rng rng(6);
  int round_trip_failures = 0;
  const std::vector<std::string> words = {"CMU", "06516", "desk lamp", "a; b", "$1,299.00", "x  y"};
  for (int i = 0; i < 10000; ++i) {
    const int label = 1 + static_cast<int>(rng.below(40));
    const auto& w = words[rng.below(words.size())];
    actions::Action a;
    switch (rng.below(7)) {
      case 0: a = actions::Click{label}; break;
      case 1: a = actions::Type{label, w}; break;
      case 2:
        a = actions::Scroll{rng.bernoulli(0.5) ? std::optional<int>(label) : std::nullopt,
                            rng.bernoulli(0.5) ? actions::ScrollDirection::up : actions::ScrollDirection::down};
        break;
      case 3: a = actions::Wait{}; break;
      case 4: a = actions::GoBack{}; break;
      case 5: a = actions::Google{}; break;
      default: a = actions::Answer{w}; break;
    }
    const actions::ActionRecord rec{"t" + std::to_string(i), a, ""};
    const auto back = actions::parse_agent_output(actions::format_record(rec));
    if (!(back.action == a) || back.thought != rec.thought) ++round_trip_failures;
  }
  return {cases >= 40 && failures == 0 && quoted.empty() && round_trip_failures == 0,
          std::to_string(cases) + " golden cases, " + std::to_string(failures) + " failures, " +
              std::to_string(quoted.size()) + " quoted strings missing; 10000 round trips, " +
              std::to_string(round_trip_failures) + " failures"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PAE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome c7() {
  const fs::path dir = fs::temp_directory_path() / "pae_acceptance_c7";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string w = (fs::path(PAE_SOURCE_DIR) / "data/worlds/threeshop.json").string();
  const std::string pool = (dir / "pool.jsonl").string();
  std::ofstream(dir / "cfg.json") << R"({"iterations": 3, "rollouts_per_iteration": 256})";
  if (run_cli("--seed 42 propose --world " + w + " --out " + pool + " --n 300", dir / "propose.log") != 0) {
    return {false, "pae propose failed: " + slurp(dir / "propose.log")};
  }
  for (int workers : {1, 4}) {
    const auto out = dir / ("w" + std::to_string(workers));
    const std::string args = "--seed 42 --workers " + std::to_string(workers) + " --config " +
                             (dir / "cfg.json").string() + " train --world " + w + " --pool " + pool +
                             " --out " + out.string();
    if (run_cli(args, dir / "train.log") != 0) return {false, "pae train failed: " + slurp(dir / "train.log")};
  }
  const auto csv1 = slurp(dir / "w1/metrics.csv"), csv4 = slurp(dir / "w4/metrics.csv");
  const auto p1 = slurp(dir / "w1/params_final.bin"), p4 = slurp(dir / "w4/params_final.bin");
  const bool ok = !csv1.empty() && !p1.empty() && csv1 == csv4 && p1 == p4;
  return {ok, std::string("metrics.csv ") + (csv1 == csv4 ? "identical" : "differs") + ", params_final.bin " +
                  (p1 == p4 ? "identical" : "differs") + " (" + std::to_string(p1.size()) + " bytes)"};
}

Outcome c8() {
  Rng rng(8);
  int mismatches = 0, order_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    const double p = rng.uniform(), q = rng.uniform();
    std::vector<bool> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.bernoulli(p);
      b[i] = rng.bernoulli(q);
    }
    const auto r = harness::alignment_report(a, b);
    int tp = 0, fp = 0, fn = 0, tn = 0, disagree = 0, pa = 0, pb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += a[i] && b[i];
      fp += a[i] && !b[i];
      fn += !a[i] && b[i];
      tn += !a[i] && !b[i];
      disagree += a[i] != b[i];
      pa += a[i];
      pb += b[i];
    }
    const double inst = static_cast<double>(disagree) / static_cast<double>(n);
    const double sys = static_cast<double>(std::abs(pa - pb)) / static_cast<double>(n);
    if (r.tp != tp || r.fp != fp || r.fn != fn || r.tn != tn || r.instance_misalignment != inst ||
        r.system_misalignment != sys) {
      ++mismatches;
    }
    if (r.system_misalignment > r.instance_misalignment) ++order_violations;
  }
  return {mismatches == 0 && order_violations == 0,
          "1000 random label vectors: " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(order_violations) + " system > instance"};
}

Outcome c9() {
  const auto& e = experiment();
  const policy::ScriptedPolicy scripted(world(), {});
  std::vector<Trajectory> demos;
  for (std::size_t i = 0; i < 40 && i < e.splits.train.size(); ++i) {
    auto t = rollout::run_episode(world(), e.splits.train[i], scripted, {}, i).trajectory;
    t.terminal_reward = 1;
    demos.push_back(std::move(t));
  }
  Rng rng(9);
  double worst = 0, worst_update = 0;
  for (int inst = 0; inst < 20; ++inst) {
    // A random batch of demo steps under random weights and temperature.
    std::vector<policy::TrainingPair> pairs;
    std::vector<Trajectory> chosen;
    for (int k = 0; k < 3; ++k) chosen.push_back(demos[rng.below(demos.size())]);
    for (const auto& t : chosen) {
      for (auto& p : policy::pairs_from_trajectory(t, true)) pairs.push_back(std::move(p));
    }
    policy::PolicyParams params;
    params.temperature = 0.3 + rng.uniform() * 1.7;
    for (const auto& pr : pairs) {
      for (const auto& fs : pr.candidate_features) {
        for (const auto& f : fs) {
          if (!params.weights.contains(f)) params.weights[f] = rng.uniform() * 2 - 1;
        }
      }
    }
    const auto grad = policy::nll_gradient(params, pairs);
    const double h = 1e-6;
    for (const auto& [f, g] : grad) {
      auto up = params, down = params;
      up.weights[f] += h;
      down.weights[f] -= h;
      const double numeric = (policy::nll(up, pairs) - policy::nll(down, pairs)) / (2 * h);
      worst = std::max(worst, std::abs(numeric - g));
    }
    // One full-batch epoch of update_from_demos is exactly one step along it.
    policy::UpdateConfig uc;
    uc.epochs = 1;
    uc.batch_size = 0;
    uc.learning_rate = 0.1;
    const auto updated = policy::update_from_demos(params, chosen, uc);
    for (const auto& [f, g] : grad) {
      worst_update = std::max(worst_update, std::abs(updated.weight(f) - (params.weight(f) - 0.1 * g)));
    }
  }
  return {worst < 1e-6 && worst_update < 1e-12,
          "20 instances, max |analytic - numeric| = " + sci(worst) +
              ", update deviation " + sci(worst_update)};
}

Outcome c10() {
  const auto& tasks = experiment().splits.train;
  web::EpisodeConfig cfg;
  Rng rng(10);
  long steps = 0;
  int episodes = 0;
  std::string failure;
  auto fail = [&](const std::string& what) {
    if (failure.empty()) failure = what + " at step " + std::to_string(steps);
  };
  while (steps < 100000 && failure.empty()) {
    const Task& task = tasks[rng.below(tasks.size())];
    auto [state, obs] = web::reset(world(), task.site_id, task, cfg, rng.next());
    ++episodes;
    while (!web::is_terminal(state, cfg) && steps < 100000) {
      // Label bijectivity: 1..K in document order, one per visible element.
      const auto vis = web::visible_elements(world(), state, cfg);
      if (obs.marked_elements.size() != vis.size() || obs.ax_tree != obs.marked_elements) fail("label/tree mismatch");
      std::set<const web::ElementSpec*> distinct(vis.begin(), vis.end());
      if (distinct.size() != vis.size()) fail("duplicate element");
      for (std::size_t i = 0; i < vis.size(); ++i) {
        const auto& m = obs.marked_elements[i];
        if (m.label != static_cast<int>(i) + 1 || m.caption != vis[i]->caption) fail("label order");
        if (i > 0 && vis[i]->row < vis[i - 1]->row) fail("document order");
      }
      // Scroll clamp.
      const auto& page = world().site(state.site_id).page(state.current_page);
      const int max_top = std::max(0, page.page_height - cfg.viewport_rows);
      if (state.viewport_top < 0 || state.viewport_top > max_top) fail("viewport outside page");

      actions::Action a;
      const double u = rng.uniform();
      if (u < 0.05) {
        a = actions::Click{static_cast<int>(rng.below(30))};  // often invalid
      } else if (u < 0.08) {
        a = actions::Answer{"x"};
      } else {
        const auto cands = policy::candidate_actions(policy::make_input(task, obs, {}));
        a = cands[rng.below(cands.size())];
        if (std::holds_alternative<actions::Answer>(a) && rng.bernoulli(0.9)) a = actions::Wait{};
      }
      const auto before = state;
      auto r = web::step(world(), state, a, cfg);
      ++steps;
      if (r.state.step_count != before.step_count + 1 || r.state.step_count > cfg.horizon) fail("step count");
      if (r.done != web::is_terminal(r.state, cfg)) fail("done flag");
      if (r.invalid_action) {
        auto expect = before;
        expect.step_count += 1;
        if (!(r.state == expect)) fail("invalid action changed state");
      }
      // GoBack undoes a navigation.
      const bool navigated = r.state.current_page != before.current_page || r.state.site_id != before.site_id;
      if (navigated && !r.done && !std::holds_alternative<actions::GoBack>(a)) {
        const auto back = web::step(world(), r.state, actions::GoBack{}, cfg).state;
        if (back.current_page != before.current_page || back.site_id != before.site_id ||
            back.viewport_top != before.viewport_top || back.session != r.state.session) {
          fail("GoBack is not an inverse of " + actions::format_action(a) + " on " + before.current_page);
        }
      }
      state = std::move(r.state);
      obs = std::move(r.observation);
    }
    if (steps < 100000 && state.step_count > cfg.horizon) fail("horizon exceeded");
  }
  return {failure.empty() && steps == 100000,
          std::to_string(steps) + " steps over " + std::to_string(episodes) + " episodes" +
              (failure.empty() ? "" : "; " + failure)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"end-to-end skill discovery", c1}, {"judge noise robustness", c2}, {"evaluator ablation order", c3},
      {"cot ablation direction", c4},     {"filter invariants", c5},      {"parser conformance", c6},
      {"determinism across workers", c7}, {"alignment math", c8},         {"gradient check", c9},
      {"environment invariants", c10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
