#include "pae/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "pae/proposer.hpp"
#include "pae/rollout.hpp"
#include "pae/util.hpp"

namespace pae::harness {

std::string_view to_string(SplitName name) {
  switch (name) {
    case SplitName::seen_tasks: return "seen_tasks";
    case SplitName::unseen_tasks: return "unseen_tasks";
    case SplitName::unseen_sites: return "unseen_sites";
  }
  return "seen_tasks";
}

namespace {

EvalSplit make_split(SplitName name, std::vector<Task> tasks) {
  if (tasks.empty()) throw PreconditionError("split " + std::string(to_string(name)) + " is empty");
  EvalSplit s;
  s.name = name;
  for (const auto& t : tasks) {
    if (!t.verifier_ref) {
      throw PreconditionError("evaluation task " + t.task_id + " has no verifier reference");
    }
    s.sites.insert(t.site_id);
  }
  s.tasks = std::move(tasks);
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

Splits make_splits(const web::World& world, const std::vector<Task>& pool, double holdout_fraction,
                   const std::vector<std::string>& unseen_site_ids, uint64_t seed,
                   int unseen_site_tasks, ContextKind unseen_context) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw PreconditionError("holdout_fraction must lie in (0, 1)");
  }
  const std::set<std::string> unseen(unseen_site_ids.begin(), unseen_site_ids.end());
  for (const auto& t : pool) {
    if (unseen.contains(t.site_id)) {
      throw PreconditionError("pool task " + t.task_id + " comes from unseen site " + t.site_id);
    }
  }

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(pool.size())));
  std::vector<bool> held(pool.size(), false);
  for (std::size_t i = 0; i < hold; ++i) held[order[i]] = true;

  Splits out;
  std::vector<Task> unseen_tasks;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (held[i] ? unseen_tasks : out.train).push_back(pool[i]);
  }
  out.eval.push_back(make_split(SplitName::seen_tasks, out.train));
  out.eval.push_back(make_split(SplitName::unseen_tasks, std::move(unseen_tasks)));
  if (!unseen_site_ids.empty()) {
    const int n = unseen_site_tasks * static_cast<int>(unseen_site_ids.size());
    auto generated = proposer::propose_world(world, unseen_context, n, derive_seed(seed, 1),
                                             unseen_site_ids);
    out.eval.push_back(make_split(SplitName::unseen_sites, std::move(generated.tasks)));
  }
  return out;
}

double weighted_average(const std::map<std::string, SiteRate>& per_site) {
  int s = 0, n = 0;
  for (const auto& [site, r] : per_site) {
    s += r.successes;
    n += r.total;
  }
  return n == 0 ? 0.0 : static_cast<double>(s) / n;
}

SplitResult evaluate_policy(const web::World& world, const EvalSplit& split,
                            const policy::Policy& policy, const web::EpisodeConfig& config,
                            uint64_t seed, int workers) {
  std::vector<char> ok(split.tasks.size(), 0);
  rollout::parallel_for(split.tasks.size(), workers, [&](std::size_t i) {
    const auto r = rollout::run_episode(world, split.tasks[i], policy, config, derive_seed(seed, i));
    ok[i] = web::oracle_verify(world, split.tasks[i], r.final_state) ? 1 : 0;
  });
  SplitResult res;
  res.name = std::string(to_string(split.name));
  for (const auto& site : split.sites) res.per_site[site];
  for (std::size_t i = 0; i < ok.size(); ++i) {
    auto& r = res.per_site[split.tasks[i].site_id];
    ++r.total;
    r.successes += ok[i];
    ++res.total;
    res.successes += ok[i];
  }
  return res;
}

AlignmentReport alignment_report(const std::vector<bool>& auto_verdicts,
                                 const std::vector<bool>& reference_labels) {
  if (auto_verdicts.size() != reference_labels.size()) {
    throw PreconditionError("alignment_report: " + std::to_string(auto_verdicts.size()) +
                            " verdicts vs " + std::to_string(reference_labels.size()) + " labels");
  }
  AlignmentReport r;
  for (std::size_t i = 0; i < auto_verdicts.size(); ++i) {
    const bool a = auto_verdicts[i], h = reference_labels[i];
    if (a && h) ++r.tp;
    else if (a) ++r.fp;
    else if (h) ++r.fn;
    else ++r.tn;
  }
  const int n = r.n();
  if (n > 0) {
    r.instance_misalignment = static_cast<double>(r.fp + r.fn) / n;
    // auto rate - reference rate = (FP - FN) / n
    r.system_misalignment = static_cast<double>(std::abs(r.fp - r.fn)) / n;
  }
  return r;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "iteration,train_success_proxy,heldout_success_oracle,running_avg,rollouts,successes_kept";
  if (!rows.empty()) {
    for (const auto& [name, v] : rows.front().extra) out += "," + name;
  }
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + fmt(r.train_success_proxy) + "," +
           fmt(r.heldout_success_oracle) + "," + fmt(r.running_avg) + "," +
           std::to_string(r.rollouts) + "," + std::to_string(r.successes_kept);
    for (const auto& [name, v] : r.extra) out += "," + fmt(v);
    out += "\n";
  }
  return out;
}

nlohmann::json to_json(const AlignmentReport& r) {
  return {{"tp", r.tp},
          {"fp", r.fp},
          {"fn", r.fn},
          {"tn", r.tn},
          {"n", r.n()},
          {"instance_misalignment", r.instance_misalignment},
          {"system_misalignment", r.system_misalignment}};
}

nlohmann::json to_json(const SplitResult& result) {
  nlohmann::json sites = nlohmann::json::object();
  for (const auto& [site, r] : result.per_site) {
    sites[site] = {{"successes", r.successes}, {"total", r.total}, {"rate", r.rate()}};
  }
  return {{"name", result.name},
          {"per_site", sites},
          {"successes", result.successes},
          {"total", result.total},
          {"average", result.average()}};
}

void emit_report(const std::vector<MetricsRow>& metrics,
                 const std::optional<AlignmentReport>& alignment,
                 const std::vector<SplitResult>& final_results, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  write_file(out_dir / "metrics.csv", metrics_csv(metrics));

  std::string md = "# Run summary\n";
  for (const auto& res : final_results) {
    md += "\n## " + res.name + "\n\n| Site | Tasks | Success (%) |\n|---|---|---|\n";
    for (const auto& [site, r] : res.per_site) {
      md += "| " + site + " | " + std::to_string(r.total) + " | " + pct(r.rate()) + " |\n";
    }
    md += "| Average | " + std::to_string(res.total) + " | " + pct(res.average()) + " |\n";
  }
  if (!metrics.empty()) {
    md += "\n## Iterations\n\n| Iteration | Proxy success (%) | Held-out success (%) | Running avg (%) |\n"
          "|---|---|---|---|\n";
    for (const auto& r : metrics) {
      md += "| " + std::to_string(r.iteration) + " | " + pct(r.train_success_proxy) + " | " +
            pct(r.heldout_success_oracle) + " | " + pct(r.running_avg) + " |\n";
    }
  }
  if (alignment) {
    const auto& a = *alignment;
    md += "\n## Evaluator alignment\n\n| | Reference success | Reference failure |\n|---|---|---|\n";
    md += "| Judged success | " + std::to_string(a.tp) + " | " + std::to_string(a.fp) + " |\n";
    md += "| Judged failure | " + std::to_string(a.fn) + " | " + std::to_string(a.tn) + " |\n\n";
    md += "Instance misalignment: " + pct(a.instance_misalignment) +
          "%. System misalignment: " + pct(a.system_misalignment) + "%.\n";
  }
  write_file(out_dir / "summary.md", md);

  nlohmann::json j;
  j["schema_version"] = 1;
  j["metrics"] = nlohmann::json::array();
  for (const auto& r : metrics) {
    nlohmann::json row = {{"iteration", r.iteration},
                          {"train_success_proxy", r.train_success_proxy},
                          {"heldout_success_oracle", r.heldout_success_oracle},
                          {"running_avg", r.running_avg},
                          {"rollouts", r.rollouts},
                          {"successes_kept", r.successes_kept}};
    for (const auto& [name, v] : r.extra) row[name] = v;
    j["metrics"].push_back(row);
  }
  j["splits"] = nlohmann::json::array();
  for (const auto& res : final_results) j["splits"].push_back(to_json(res));
  j["alignment"] = alignment ? to_json(*alignment) : nlohmann::json(nullptr);
  write_file(out_dir / "report.json", j.dump(2) + "\n");
}

}  // namespace pae::harness
