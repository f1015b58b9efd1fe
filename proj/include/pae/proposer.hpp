#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pae/backend.hpp"
#include "pae/task.hpp"
#include "pae/webworld.hpp"

namespace pae::proposer {

/// One captured page from a user demo: what a screenshot of it would show.
struct DemoPage {
  std::string title;
  std::vector<std::string> visible_text;
  std::vector<std::string> captions;

  std::string render() const;
};

struct ContextInfo {
  ContextKind kind = ContextKind::name_only;
  std::string site_id;
  std::string site_name;
  std::optional<std::string> descriptor;
  std::vector<DemoPage> demo_pages;

  /// user_demos needs demos, name_only must have none.
  void validate() const;
};

/// Top-of-page summary as seen in the default viewport.
DemoPage summarize_page(const web::World& world, const std::string& site_id,
                        const std::string& page_id);

/// name_only: site name and descriptor. user_demos: additionally the entry
/// page plus k_demo-1 pages drawn with `seed`.
ContextInfo make_context(const web::World& world, const std::string& site_id, ContextKind kind,
                         int k_demo = 3, uint64_t seed = 0);

/// Lowercase tokens a proposer may use to name entities under this context.
std::set<std::string> context_vocabulary(const ContextInfo& context);

struct TaskPool {
  std::vector<Task> tasks;
  uint64_t generation_seed = 0;
  int dedup_removed = 0;
  bool truncated = false;
  std::vector<std::string> warnings;
};

enum class TemplateFamily { navigate, report, session };

struct TemplateTask {
  Task task;
  TemplateFamily family;
  std::string entity;  // page title the task names
};

/// Every template instance for the context's site whose entity is nameable
/// under the context and whose scripted solution verifies in 2..7 steps.
/// Deterministic order; task ids encode the template index.
std::vector<TemplateTask> enumerate_templates(const web::World& world, const ContextInfo& context,
                                              const web::EpisodeConfig& config = {});

/// Draws n distinct templates. When n exceeds the template space the whole
/// space comes back with truncated=true and a warning.
TaskPool propose_scripted(const web::World& world, const ContextInfo& context, int n,
                          uint64_t seed, const web::EpisodeConfig& config = {});

/// Proposes n_total tasks spread evenly over `site_ids` (or every site).
TaskPool propose_world(const web::World& world, ContextKind kind, int n_total, uint64_t seed,
                       const std::vector<std::string>& site_ids = {}, int k_demo = 3);

/// Asks a remote model for n tasks and parses its JSONL output. Tasks carry
/// no verifier. Throws remote::TransportError.
TaskPool propose_remote(const ContextInfo& context, int n, remote::ChatBackend& backend);

/// Parses the JSONL section of a proposer reply. Lines that start with '{'
/// but do not parse as a task are skipped and counted.
std::vector<Task> parse_proposer_reply(const std::string& reply, const ContextInfo& context,
                                       int* malformed_lines = nullptr);

/// Removes tasks whose normalized instruction repeats an earlier one.
TaskPool dedup_pool(TaskPool pool);

inline constexpr int kPoolSchemaVersion = 1;

/// One task per line: {schema_version, web_name, id, ques, site_id,
/// context_kind, verifier_ref, difficulty_hint}.
void write_pool_jsonl(const std::filesystem::path& path, const TaskPool& pool);
TaskPool read_pool_jsonl(const std::filesystem::path& path);

}  // namespace pae::proposer
