#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pae/action.hpp"
#include "pae/task.hpp"

namespace pae::web {

enum class ElementKind { link, button, textbox, select_option };

std::string_view to_string(ElementKind kind);
std::optional<ElementKind> element_kind_from_string(std::string_view text);

enum class SessionOp { set, add, remove, clear };

struct GoTo {
  std::string page_id;
  bool operator==(const GoTo&) const = default;
};

struct MutateSession {
  std::string var;
  SessionOp op = SessionOp::set;
  std::string value;
  bool operator==(const MutateSession&) const = default;
};

/// Looks the typed text up in the site's search index.
struct SubmitSearch {
  bool operator==(const SubmitSearch&) const = default;
};

using Effect = std::variant<std::monostate, GoTo, MutateSession, SubmitSearch>;

struct ElementSpec {
  std::string element_id;
  ElementKind kind = ElementKind::link;
  std::string caption;
  int row = 0;
  Effect effect;
};

struct TextBlock {
  int row = 0;
  std::string text;
};

struct PageSpec {
  std::string page_id;
  std::string title;
  std::vector<TextBlock> static_text;
  std::vector<ElementSpec> elements;  // document order
  int page_height = 1;
};

using SessionValue = std::vector<std::string>;

struct SessionVar {
  std::string name;
  SessionValue initial;
};

struct SiteSpec {
  std::string site_id;
  std::string display_name;
  std::string descriptor;
  std::string entry_page;
  std::vector<PageSpec> pages;  // document order
  std::map<std::string, std::vector<std::string>> search_index;
  std::vector<SessionVar> session_schema;
  std::map<std::string, std::string> verifiers;  // verifier id -> program text

  const PageSpec* find_page(std::string_view page_id) const;
  const PageSpec& page(std::string_view page_id) const;
};

/// Immutable after loading; share freely across threads.
struct World {
  std::string name;
  std::vector<SiteSpec> sites;

  const SiteSpec* find_site(std::string_view site_id) const;
  const SiteSpec& site(std::string_view site_id) const;
};

struct ValidationIssue {
  std::string path;
  std::string message;
};

struct LoadResult {
  std::optional<World> world;
  std::vector<ValidationIssue> issues;
  bool ok() const { return world.has_value() && issues.empty(); }
};

/// Parses a site-spec JSON document (docs/world_format.md) and validates it.
/// Never throws on bad input; problems come back as issues.
LoadResult load_world(std::string_view document);
LoadResult load_world_file(const std::filesystem::path& path);

/// Loads or throws std::runtime_error listing every issue.
World load_world_or_throw(const std::filesystem::path& path);

/// Semantic checks over an already-parsed world (dangling references,
/// duplicate ids, row bounds, verifier syntax).
std::vector<ValidationIssue> validate_world(const World& world);

struct EpisodeConfig {
  int horizon = 10;
  int viewport_rows = 20;
  int scroll_step = 15;
  bool google_enabled = false;
  std::optional<std::string> hub_site;

  /// Throws PreconditionError.
  void validate() const;
};

struct HistoryEntry {
  std::string site_id;
  std::string page_id;
  int viewport_top = 0;
  bool operator==(const HistoryEntry&) const = default;
};

struct WorldState {
  std::string site_id;
  std::string current_page;
  int viewport_top = 0;
  std::map<std::string, SessionValue> session;
  std::vector<HistoryEntry> history;
  int step_count = 0;
  std::optional<std::string> answered;
  uint64_t rng_seed = 0;

  bool operator==(const WorldState&) const = default;
};

/// Stable textual digest of every state field; used to check purity.
std::string state_digest(const WorldState& state);

struct MarkedElement {
  int label = 0;
  ElementKind kind = ElementKind::link;
  std::string caption;
  bool operator==(const MarkedElement&) const = default;
};

struct Observation {
  int step_index = 0;
  std::string page_title;
  std::vector<MarkedElement> marked_elements;
  std::vector<std::string> visible_text;
  std::vector<MarkedElement> ax_tree;
  bool operator==(const Observation&) const = default;
};

/// Byte-exact text rendering used for remote prompts and logging.
std::string render_observation_text(const Observation& obs);

struct ResetResult {
  WorldState state;
  Observation observation;
};

ResetResult reset(const World& world, std::string_view site_id, const Task& task,
                  const EpisodeConfig& config, uint64_t seed);

struct StepResult {
  WorldState state;
  Observation observation;
  bool done = false;
  bool invalid_action = false;
};

/// Applies one action. Semantically invalid actions consume a step and leave
/// page and session untouched (flagged invalid_action). Throws
/// PreconditionError when called on a terminal state.
StepResult step(const World& world, const WorldState& state, const actions::Action& action,
                const EpisodeConfig& config);

/// Consumes a step without acting, for agent output that did not parse.
StepResult step_unparsed(const World& world, const WorldState& state, const EpisodeConfig& config);

/// Marks the elements inside the viewport 1..K in document order.
Observation render_observation(const World& world, const WorldState& state,
                               const EpisodeConfig& config);

/// Elements currently in the viewport, in label order (label i is index i-1).
std::vector<const ElementSpec*> visible_elements(const World& world, const WorldState& state,
                                                 const EpisodeConfig& config);

bool is_terminal(const WorldState& state, const EpisodeConfig& config);

/// Ground-truth check of a task against the final hidden state. For the
/// evaluation harness and synthetic judges only. Throws std::invalid_argument
/// ("unverifiable task") when the task has no verifier reference.
bool oracle_verify(const World& world, const Task& task, const WorldState& final_state);

}  // namespace pae::web
