#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pae/evaluator.hpp"
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

struct Globals {
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::string config;
};

web::World load_world_checked(const std::string& path) {
  auto res = web::load_world_file(path);
  if (!res.ok()) {
    std::string msg = "invalid world " + path + ":";
    for (const auto& i : res.issues) msg += "\n  " + i.path + ": " + i.message;
    throw std::runtime_error(msg);
  }
  return std::move(*res.world);
}

trainer::TrainConfig load_config(const Globals& g) {
  trainer::TrainConfig c = g.config.empty() ? trainer::TrainConfig{} : trainer::load_train_config(g.config);
  if (g.seed) c.master_seed = *g.seed;
  if (g.workers) c.worker_count = *g.workers;
  c.validate();
  return c;
}

remote::BackendConfig backend_config(const std::string& path) {
  return path.empty() ? remote::BackendConfig::from_env() : remote::BackendConfig::from_file(path);
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

void write_tasks(const fs::path& path, const std::vector<Task>& tasks) {
  proposer::TaskPool p;
  p.tasks = tasks;
  proposer::write_pool_jsonl(path, p);
}

int cmd_validate(const std::string& world_path) {
  auto res = web::load_world_file(world_path);
  if (!res.ok()) {
    for (const auto& i : res.issues) std::cerr << world_path << ": " << i.path << ": " << i.message << "\n";
    return 1;
  }
  std::size_t pages = 0, verifiers = 0;
  for (const auto& s : res.world->sites) {
    pages += s.pages.size();
    verifiers += s.verifiers.size();
  }
  std::cout << "ok: " << res.world->name << ", " << res.world->sites.size() << " sites, " << pages
            << " pages, " << verifiers << " verifiers\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pae: propose tasks, roll out agents, judge and train on a synthetic web world"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--workers", g.workers, "Worker threads (overrides the config)");
  app.add_option("--config", g.config, "Train config JSON");

  std::string world_path;

  auto* validate = app.add_subcommand("validate-world", "Check a world file");
  validate->add_option("--world", world_path, "World JSON")->required();

  auto* propose = app.add_subcommand("propose", "Propose a task pool");
  std::string pool_out, context = "user_demos", sites_csv, backend_path;
  int n_tasks = 300, k_demo = 3;
  propose->add_option("--world", world_path)->required();
  propose->add_option("--out", pool_out, "Pool JSONL to write")->required();
  propose->add_option("--n", n_tasks, "Total tasks");
  propose->add_option("--context", context, "name_only | user_demos | remote");
  propose->add_option("--sites", sites_csv, "Comma-separated site ids (default: all)");
  propose->add_option("--k-demo", k_demo, "Demo pages per site for user_demos");
  propose->add_option("--backend-config", backend_path, "Remote backend JSON (default: env)");

  auto* roll = app.add_subcommand("rollout", "Run episodes and judge them");
  std::string pool_path, policy_kind = "random", params_path, traj_out, judge_kind = "synthetic";
  int n_episodes = 0;
  bool greedy = false;
  double fp = 0.0, fn = 0.0;
  roll->add_option("--world", world_path)->required();
  roll->add_option("--pool", pool_path)->required();
  roll->add_option("--policy", policy_kind, "random | scripted_solver | learnable | remote");
  roll->add_option("--params", params_path, "Params for the learnable policy");
  roll->add_option("--n", n_episodes, "Episodes (default: one per task)");
  roll->add_flag("--greedy", greedy, "Argmax decoding for the learnable policy");
  roll->add_option("--judge", judge_kind, "synthetic | remote");
  roll->add_option("--fp", fp, "Synthetic judge false-positive rate");
  roll->add_option("--fn", fn, "Synthetic judge false-negative rate");
  roll->add_option("--backend-config", backend_path);
  roll->add_option("--out", traj_out, "Trajectory JSONL")->required();

  auto* train = app.add_subcommand("train", "Run the propose-act-evaluate training loop");
  std::string out_dir, unseen_csv, init_params;
  double holdout = 0.2;
  int unseen_per_site = 50;
  train->add_option("--world", world_path)->required();
  train->add_option("--pool", pool_path)->required();
  train->add_option("--out", out_dir)->required();
  train->add_option("--holdout", holdout, "Fraction of the pool held out as unseen tasks");
  train->add_option("--unseen-sites", unseen_csv, "Sites excluded from training (comma-separated)");
  train->add_option("--unseen-site-tasks", unseen_per_site, "Tasks per unseen site");
  train->add_option("--init-params", init_params, "Start from these params");

  auto* evalc = app.add_subcommand("eval", "Evaluate a policy on task files with the oracle");
  std::vector<std::string> task_files;
  evalc->add_option("--world", world_path)->required();
  evalc->add_option("--tasks", task_files, "Task JSONL files, one split each")->required();
  evalc->add_option("--policy", policy_kind);
  evalc->add_option("--params", params_path);
  evalc->add_option("--out", out_dir, "Write a report here");

  auto* align = app.add_subcommand("align", "Compare judge verdicts with reference labels");
  std::string traj_path, labels_path, align_out;
  align->add_option("--world", world_path, "World for oracle reference labels");
  align->add_option("--trajectories", traj_path)->required();
  align->add_option("--labels", labels_path, "JSONL {task_id, seed, label}; default: oracle");
  align->add_option("--out", align_out, "Alignment JSON");

  auto* report = app.add_subcommand("report", "Re-emit CSV/Markdown/JSON from a run directory");
  std::string run_dir, align_path;
  report->add_option("--run", run_dir)->required();
  report->add_option("--alignment", align_path, "Alignment JSON from `pae align`");
  report->add_option("--out", out_dir, "Output directory (default: the run directory)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(world_path);

    if (*propose) {
      const auto world = load_world_checked(world_path);
      const auto kind = context_kind_from_string(context);
      const uint64_t seed = g.seed.value_or(0);
      auto sites = split_csv(sites_csv);
      proposer::TaskPool pool;
      if (kind == ContextKind::remote) {
        if (sites.empty()) {
          for (const auto& s : world.sites) sites.push_back(s.site_id);
        }
        remote::HttpChatBackend backend(backend_config(backend_path));
        const int per = std::max(1, n_tasks / static_cast<int>(sites.size()));
        for (const auto& site : sites) {
          auto ctx = proposer::make_context(world, site, ContextKind::user_demos, k_demo,
                                            derive_seed(seed, hash_string(site)));
          ctx.kind = ContextKind::remote;
          auto part = proposer::propose_remote(ctx, per, backend);
          pool.warnings.insert(pool.warnings.end(), part.warnings.begin(), part.warnings.end());
          pool.tasks.insert(pool.tasks.end(), part.tasks.begin(), part.tasks.end());
        }
        pool = proposer::dedup_pool(std::move(pool));
      } else {
        pool = proposer::propose_world(world, kind, n_tasks, seed, sites, k_demo);
      }
      for (const auto& w : pool.warnings) std::cerr << "warning: " << w << "\n";
      proposer::write_pool_jsonl(pool_out, pool);
      std::cout << "wrote " << pool.tasks.size() << " tasks to " << pool_out << " (" << pool.dedup_removed
                << " duplicates removed)\n";
      return 0;
    }

    auto make_policy = [&](const web::World& world, const trainer::TrainConfig& c,
                           std::unique_ptr<remote::ChatBackend>& backend, bool greedy_default)
        -> std::unique_ptr<policy::Policy> {
      const auto kind = policy::policy_kind_from_string(policy_kind);
      switch (kind) {
        case policy::PolicyKind::random: return std::make_unique<policy::RandomPolicy>();
        case policy::PolicyKind::scripted_solver:
          return std::make_unique<policy::ScriptedPolicy>(world, c.episode);
        case policy::PolicyKind::learnable: {
          policy::PolicyParams p = params_path.empty() ? policy::PolicyParams{} : policy::load_params(params_path);
          return std::make_unique<policy::LearnablePolicy>(p, greedy_default || greedy);
        }
        case policy::PolicyKind::remote:
          backend = std::make_unique<remote::HttpChatBackend>(backend_config(backend_path));
          return std::make_unique<policy::RemotePolicy>(*backend);
      }
      throw std::logic_error("unreachable");
    };

    if (*roll) {
      const auto world = load_world_checked(world_path);
      const auto c = load_config(g);
      const auto tasks = proposer::read_pool_jsonl(pool_path).tasks;
      if (tasks.empty()) throw std::runtime_error("empty pool " + pool_path);
      std::unique_ptr<remote::ChatBackend> backend;
      const auto pol = make_policy(world, c, backend, false);
      std::unique_ptr<remote::ChatBackend> judge_backend;
      std::unique_ptr<eval::OutcomeJudge> judge;
      if (judge_kind == "remote") {
        judge_backend = std::make_unique<remote::HttpChatBackend>(backend_config(backend_path));
        judge = std::make_unique<eval::RemoteJudge>(*judge_backend);
      } else if (judge_kind == "synthetic") {
        judge = std::make_unique<eval::SyntheticJudge>(fp, fn, derive_seed(c.master_seed, 0x0c));
      } else {
        throw PreconditionError("unknown judge \"" + judge_kind + "\"");
      }
      const std::size_t n = n_episodes > 0 ? static_cast<std::size_t>(n_episodes) : tasks.size();
      Rng rng(derive_seed(c.master_seed, 0x7a5c));
      std::vector<std::size_t> picks(n);
      for (std::size_t i = 0; i < n; ++i) picks[i] = n_episodes > 0 ? rng.below(tasks.size()) : i;
      std::vector<Trajectory> out(n);
      rollout::parallel_for(n, c.worker_count, [&](std::size_t i) {
        auto r = rollout::run_episode(world, tasks[picks[i]], *pol, c.episode,
                                      derive_seed(c.master_seed, 0, i));
        r.trajectory.episode_index = static_cast<int>(i);
        const eval::HiddenOutcome hidden{&world, r.final_state, r.trajectory.seed};
        r.trajectory.verdict = eval::evaluate_outcome(eval::EvalRequest::from_trajectory(r.trajectory), *judge, hidden);
        r.trajectory.terminal_reward = r.trajectory.verdict.success ? 1 : 0;
        if (!r.trajectory.steps.empty()) r.trajectory.steps.back().reward = r.trajectory.terminal_reward;
        out[i] = std::move(r.trajectory);
      });
      std::filesystem::remove(traj_out);
      trainer::append_trajectories_jsonl(traj_out, out);
      const auto ok = trainer::filter_successful(out).size();
      std::cout << "judged success " << ok << "/" << n << "; wrote " << traj_out << "\n";
      return 0;
    }

    if (*train) {
      const auto world = load_world_checked(world_path);
      const auto c = load_config(g);
      const auto pool = proposer::read_pool_jsonl(pool_path).tasks;
      const auto splits = harness::make_splits(world, pool, holdout, split_csv(unseen_csv),
                                               c.master_seed, unseen_per_site);
      fs::create_directories(out_dir);
      write_tasks(fs::path(out_dir) / "train_pool.jsonl", splits.train);
      for (const auto& s : splits.eval) {
        write_tasks(fs::path(out_dir) / ("split_" + std::string(harness::to_string(s.name)) + ".jsonl"), s.tasks);
      }
      std::ofstream(fs::path(out_dir) / "config.json") << trainer::to_json(c).dump(2) << "\n";
      const policy::PolicyParams init = init_params.empty() ? policy::PolicyParams{} : policy::load_params(init_params);
      trainer::RunOptions opts;
      opts.out_dir = out_dir;
      opts.keep_buffer = false;
      opts.log = [](const std::string& m) { std::cerr << m << "\n"; };
      const auto result = trainer::run_training(world, splits.train, splits.eval, init, c, opts);
      harness::emit_report(result.metrics, std::nullopt, result.final_results, out_dir);
      std::cout << harness::metrics_csv(result.metrics);
      return 0;
    }

    if (*evalc) {
      const auto world = load_world_checked(world_path);
      const auto c = load_config(g);
      std::unique_ptr<remote::ChatBackend> backend;
      const auto pol = make_policy(world, c, backend, true);
      std::vector<harness::SplitResult> results;
      for (std::size_t i = 0; i < task_files.size(); ++i) {
        harness::EvalSplit split;
        split.tasks = proposer::read_pool_jsonl(task_files[i]).tasks;
        for (const auto& t : split.tasks) split.sites.insert(t.site_id);
        auto res = harness::evaluate_policy(world, split, *pol, c.episode, derive_seed(c.master_seed, 0xe7a1, i),
                                            c.worker_count);
        res.name = fs::path(task_files[i]).stem().string();
        std::cout << res.name << ": " << res.successes << "/" << res.total << " = " << res.average() << "\n";
        for (const auto& [site, r] : res.per_site) {
          std::cout << "  " << site << ": " << r.successes << "/" << r.total << "\n";
        }
        results.push_back(std::move(res));
      }
      if (!out_dir.empty()) harness::emit_report({}, std::nullopt, results, out_dir);
      return 0;
    }

    if (*align) {
      const auto trajectories = trainer::read_trajectories_jsonl(traj_path);
      std::vector<bool> autos, refs;
      std::map<std::pair<std::string, uint64_t>, bool> labels;
      if (!labels_path.empty()) {
        std::ifstream in(labels_path);
        if (!in) throw std::runtime_error("cannot open " + labels_path);
        std::string line;
        while (std::getline(in, line)) {
          if (trim(line).empty()) continue;
          const auto j = nlohmann::json::parse(line);
          const auto& lab = j.at("label");
          labels[{j.at("task_id").get<std::string>(), j.at("seed").get<uint64_t>()}] =
              lab.is_boolean() ? lab.get<bool>() : lab.get<int>() != 0;
        }
      }
      std::optional<web::World> world;
      if (labels_path.empty()) {
        if (world_path.empty()) throw PreconditionError("align needs --labels or --world");
        world = load_world_checked(world_path);
      }
      const auto c = load_config(g);
      for (const auto& t : trajectories) {
        autos.push_back(t.verdict.success);
        if (world) {
          refs.push_back(web::oracle_verify(*world, t.task, rollout::replay(*world, t, c.episode)));
        } else {
          auto it = labels.find({t.task.task_id, t.seed});
          if (it == labels.end()) {
            throw std::runtime_error("no reference label for " + t.task.task_id + " seed " + std::to_string(t.seed));
          }
          refs.push_back(it->second);
        }
      }
      const auto rep = harness::alignment_report(autos, refs);
      const auto j = harness::to_json(rep);
      std::cout << j.dump(2) << "\n";
      if (!align_out.empty()) std::ofstream(align_out) << j.dump(2) << "\n";
      return 0;
    }

    if (*report) {
      std::ifstream in(fs::path(run_dir) / "report.json");
      if (!in) throw std::runtime_error("no report.json in " + run_dir);
      const auto j = nlohmann::json::parse(in);
      std::vector<harness::MetricsRow> metrics;
      static const std::set<std::string> fixed = {"iteration", "train_success_proxy", "heldout_success_oracle",
                                                  "running_avg", "rollouts", "successes_kept"};
      for (const auto& m : j.at("metrics")) {
        harness::MetricsRow r;
        r.iteration = m.at("iteration");
        r.train_success_proxy = m.at("train_success_proxy");
        r.heldout_success_oracle = m.at("heldout_success_oracle");
        r.running_avg = m.at("running_avg");
        r.rollouts = m.at("rollouts");
        r.successes_kept = m.at("successes_kept");
        metrics.push_back(r);
      }
      // Extra columns keep their CSV order, which report.json does not record.
      std::ifstream csv(fs::path(run_dir) / "metrics.csv");
      std::string header;
      std::getline(csv, header);
      const auto cols = split_csv(header);
      for (std::size_t i = 0; i < metrics.size(); ++i) {
        for (const auto& col : cols) {
          if (!fixed.contains(col)) metrics[i].extra.emplace_back(col, j["metrics"][i].at(col).get<double>());
        }
      }
      std::vector<harness::SplitResult> results;
      for (const auto& s : j.at("splits")) {
        harness::SplitResult r;
        r.name = s.at("name");
        r.successes = s.at("successes");
        r.total = s.at("total");
        for (const auto& [site, v] : s.at("per_site").items()) r.per_site[site] = {v.at("successes"), v.at("total")};
        results.push_back(std::move(r));
      }
      std::optional<harness::AlignmentReport> alignment;
      nlohmann::json aj = j.at("alignment");
      if (!align_path.empty()) {
        std::ifstream ain(align_path);
        if (!ain) throw std::runtime_error("cannot open " + align_path);
        aj = nlohmann::json::parse(ain);
      }
      if (!aj.is_null()) {
        harness::AlignmentReport a;
        a.tp = aj.at("tp");
        a.fp = aj.at("fp");
        a.fn = aj.at("fn");
        a.tn = aj.at("tn");
        a.instance_misalignment = aj.at("instance_misalignment");
        a.system_misalignment = aj.at("system_misalignment");
        alignment = a;
      }
      harness::emit_report(metrics, alignment, results, out_dir.empty() ? run_dir : out_dir);
      std::cout << "report written to " << (out_dir.empty() ? run_dir : out_dir) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
