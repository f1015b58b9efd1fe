#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pae/policy.hpp"
#include "pae/task.hpp"
#include "pae/webworld.hpp"

namespace pae::harness {

enum class SplitName { seen_tasks, unseen_tasks, unseen_sites };

std::string_view to_string(SplitName name);

struct EvalSplit {
  SplitName name = SplitName::seen_tasks;
  std::vector<Task> tasks;  // all oracle-evaluable
  std::set<std::string> sites;
};

struct Splits {
  std::vector<Task> train;
  std::vector<EvalSplit> eval;  // seen_tasks, unseen_tasks, then unseen_sites if requested
};

/// Holds out round(holdout_fraction * n) pool tasks as unseen_tasks; the rest
/// form the training pool and the seen_tasks split. When unseen_site_ids is
/// non-empty, unseen_sites gets tasks proposed from those sites alone
/// (unseen_site_tasks per site); the pool must not mention them. Throws
/// PreconditionError on a bad fraction, a leaked site or an empty split.
Splits make_splits(const web::World& world, const std::vector<Task>& pool,
                   double holdout_fraction, const std::vector<std::string>& unseen_site_ids,
                   uint64_t seed, int unseen_site_tasks = 50,
                   ContextKind unseen_context = ContextKind::user_demos);

struct SiteRate {
  int successes = 0;
  int total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(successes) / total; }
};

struct SplitResult {
  std::string name;
  std::map<std::string, SiteRate> per_site;
  int successes = 0;
  int total = 0;
  /// Task-count weighted mean over sites, i.e. successes / total.
  double average() const { return total == 0 ? 0.0 : static_cast<double>(successes) / total; }
};

/// Task-count weighted average of per-site rates.
double weighted_average(const std::map<std::string, SiteRate>& per_site);

/// One episode per task, judged by the oracle. Task i runs with seed
/// derive_seed(seed, i).
SplitResult evaluate_policy(const web::World& world, const EvalSplit& split,
                            const policy::Policy& policy, const web::EpisodeConfig& config,
                            uint64_t seed, int workers = 1);

struct AlignmentReport {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int tn = 0;
  double instance_misalignment = 0.0;
  double system_misalignment = 0.0;
  int n() const { return tp + fp + fn + tn; }
};

/// Positive means success. Throws PreconditionError on length mismatch.
AlignmentReport alignment_report(const std::vector<bool>& auto_verdicts,
                                 const std::vector<bool>& reference_labels);

struct MetricsRow {
  int iteration = 0;
  double train_success_proxy = 0.0;
  double heldout_success_oracle = 0.0;
  double running_avg = 0.0;
  int rollouts = 0;
  int successes_kept = 0;
  // Further evaluation splits: (column name, value), appended after the
  // fixed columns in this order.
  std::vector<std::pair<std::string, double>> extra;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);

/// Writes metrics.csv, summary.md and report.json into out_dir, replacing
/// earlier copies.
void emit_report(const std::vector<MetricsRow>& metrics,
                 const std::optional<AlignmentReport>& alignment,
                 const std::vector<SplitResult>& final_results,
                 const std::filesystem::path& out_dir);

nlohmann::json to_json(const AlignmentReport& report);
nlohmann::json to_json(const SplitResult& result);

}  // namespace pae::harness
