#include <algorithm>
#include <sstream>

#include "pae/util.hpp"
#include "pae/verifier.hpp"
#include "pae/webworld.hpp"

namespace pae {

std::string_view to_string(ContextKind kind) {
  switch (kind) {
    case ContextKind::name_only: return "name_only";
    case ContextKind::user_demos: return "user_demos";
    case ContextKind::remote: return "remote";
  }
  return "name_only";
}

ContextKind context_kind_from_string(std::string_view text) {
  if (text == "name_only") return ContextKind::name_only;
  if (text == "user_demos") return ContextKind::user_demos;
  if (text == "remote") return ContextKind::remote;
  throw PreconditionError("unknown context kind \"" + std::string(text) + "\"");
}

}  // namespace pae

namespace pae::web {
namespace {

int max_viewport_top(const PageSpec& page, const EpisodeConfig& config) {
  return std::max(0, page.page_height - config.viewport_rows);
}

void navigate(WorldState& s, std::string site_id, std::string page_id) {
  s.history.push_back({s.site_id, s.current_page, s.viewport_top});
  s.site_id = std::move(site_id);
  s.current_page = std::move(page_id);
  s.viewport_top = 0;
}

void apply_mutation(WorldState& s, const MutateSession& m) {
  SessionValue& value = s.session[m.var];
  switch (m.op) {
    case SessionOp::set: value = {m.value}; break;
    case SessionOp::add:
      if (std::find(value.begin(), value.end(), m.value) == value.end()) value.push_back(m.value);
      break;
    case SessionOp::remove: std::erase(value, m.value); break;
    case SessionOp::clear: value.clear(); break;
  }
}

void init_session(WorldState& s, const SiteSpec& site) {
  for (const auto& var : site.session_schema) s.session.try_emplace(var.name, var.initial);
}

std::optional<std::string> search_target(const SiteSpec& site, std::string_view text) {
  auto lookup = [&](const std::string& key) -> std::optional<std::string> {
    auto it = site.search_index.find(key);
    if (it == site.search_index.end() || it->second.empty()) return std::nullopt;
    return it->second.front();
  };
  if (auto hit = lookup(normalize_text(text))) return hit;
  for (const auto& token : tokenize(text)) {
    if (auto hit = lookup(token)) return hit;
  }
  return std::nullopt;
}

// Returns false when the action is semantically invalid in this state.
bool apply_action(const World& world, WorldState& s, const actions::Action& action,
                  const EpisodeConfig& config) {
  const SiteSpec& site = world.site(s.site_id);
  const PageSpec& page = site.page(s.current_page);
  const auto visible = visible_elements(world, s, config);
  auto element_at = [&](int label) -> const ElementSpec* {
    if (label < 1 || label > static_cast<int>(visible.size())) return nullptr;
    return visible[static_cast<std::size_t>(label - 1)];
  };

  using namespace actions;
  if (auto* click = std::get_if<Click>(&action)) {
    const ElementSpec* el = element_at(click->label);
    if (!el || el->kind == ElementKind::textbox) return false;
    if (auto* go = std::get_if<GoTo>(&el->effect)) {
      navigate(s, s.site_id, go->page_id);
    } else if (auto* m = std::get_if<MutateSession>(&el->effect)) {
      apply_mutation(s, *m);
    }
    return true;
  }
  if (auto* type = std::get_if<Type>(&action)) {
    const ElementSpec* el = element_at(type->label);
    if (!el || el->kind != ElementKind::textbox) return false;
    // Clear, type, then the implicit enter key applies the box's effect.
    s.session["typed:" + el->element_id] = {type->content};
    if (std::holds_alternative<SubmitSearch>(el->effect)) {
      if (auto target = search_target(site, type->content)) navigate(s, s.site_id, *target);
    } else if (auto* go = std::get_if<GoTo>(&el->effect)) {
      navigate(s, s.site_id, go->page_id);
    } else if (auto* m = std::get_if<MutateSession>(&el->effect)) {
      apply_mutation(s, *m);
    }
    return true;
  }
  if (auto* scroll = std::get_if<Scroll>(&action)) {
    if (scroll->label && !element_at(*scroll->label)) return false;
    const int delta = scroll->direction == ScrollDirection::down ? config.scroll_step
                                                                 : -config.scroll_step;
    s.viewport_top = std::clamp(s.viewport_top + delta, 0, max_viewport_top(page, config));
    return true;
  }
  if (std::holds_alternative<Wait>(action)) return true;
  if (std::holds_alternative<GoBack>(action)) {
    if (!s.history.empty()) {
      const HistoryEntry prev = s.history.back();
      s.history.pop_back();
      s.site_id = prev.site_id;
      s.current_page = prev.page_id;
      s.viewport_top = prev.viewport_top;
    }
    return true;
  }
  if (std::holds_alternative<Google>(action)) {
    if (!config.google_enabled || !config.hub_site) return false;
    const SiteSpec& hub = world.site(*config.hub_site);
    navigate(s, hub.site_id, hub.entry_page);
    init_session(s, hub);
    return true;
  }
  if (auto* answer = std::get_if<Answer>(&action)) {
    s.answered = answer->content;
    return true;
  }
  return false;
}

}  // namespace

void EpisodeConfig::validate() const {
  if (horizon < 1) throw PreconditionError("EpisodeConfig: horizon must be >= 1");
  if (viewport_rows < 1) throw PreconditionError("EpisodeConfig: viewport_rows must be >= 1");
  if (scroll_step < 1) throw PreconditionError("EpisodeConfig: scroll_step must be >= 1");
  if (scroll_step > viewport_rows) {
    throw PreconditionError("EpisodeConfig: scroll_step must not exceed viewport_rows");
  }
  if (google_enabled && !hub_site) {
    throw PreconditionError("EpisodeConfig: google_enabled requires hub_site");
  }
}

std::string state_digest(const WorldState& s) {
  std::ostringstream out;
  out << s.site_id << '|' << s.current_page << '|' << s.viewport_top << '|' << s.step_count << '|'
      << s.rng_seed << '|' << (s.answered ? "A:" + *s.answered : std::string("-")) << "|S";
  for (const auto& [k, v] : s.session) {
    out << '{' << k;
    for (const auto& x : v) out << ',' << x;
    out << '}';
  }
  out << "|H";
  for (const auto& h : s.history) out << '(' << h.site_id << ',' << h.page_id << ',' << h.viewport_top << ')';
  return out.str();
}

std::vector<const ElementSpec*> visible_elements(const World& world, const WorldState& state,
                                                 const EpisodeConfig& config) {
  const PageSpec& page = world.site(state.site_id).page(state.current_page);
  std::vector<const ElementSpec*> out;
  const int bottom = state.viewport_top + config.viewport_rows;
  for (const auto& el : page.elements) {
    if (el.row >= state.viewport_top && el.row < bottom) out.push_back(&el);
  }
  return out;
}

Observation render_observation(const World& world, const WorldState& state,
                               const EpisodeConfig& config) {
  const PageSpec& page = world.site(state.site_id).page(state.current_page);
  Observation obs;
  obs.step_index = state.step_count;
  obs.page_title = page.title;
  int label = 0;
  for (const ElementSpec* el : visible_elements(world, state, config)) {
    obs.marked_elements.push_back({++label, el->kind, el->caption});
  }
  obs.ax_tree = obs.marked_elements;
  const int bottom = state.viewport_top + config.viewport_rows;
  for (const auto& block : page.static_text) {
    if (block.row >= state.viewport_top && block.row < bottom) obs.visible_text.push_back(block.text);
  }
  return obs;
}

std::string render_observation_text(const Observation& obs) {
  std::string out = "```observation\n";
  out += "Step: " + std::to_string(obs.step_index) + "\n";
  out += "Title: " + obs.page_title + "\n";
  out += "Elements:\n";
  for (const auto& m : obs.marked_elements) {
    out += "[" + std::to_string(m.label) + "] " + std::string(to_string(m.kind)) + ": " + m.caption +
           "\n";
  }
  out += "Text:\n";
  for (const auto& t : obs.visible_text) out += t + "\n";
  out += "```\n";
  return out;
}

bool is_terminal(const WorldState& state, const EpisodeConfig& config) {
  return state.answered.has_value() || state.step_count >= config.horizon;
}

ResetResult reset(const World& world, std::string_view site_id, const Task& /*task*/,
                  const EpisodeConfig& config, uint64_t seed) {
  config.validate();
  const SiteSpec& site = world.site(site_id);
  ResetResult r;
  r.state.site_id = site.site_id;
  r.state.current_page = site.entry_page;
  r.state.rng_seed = seed;
  init_session(r.state, site);
  r.observation = render_observation(world, r.state, config);
  return r;
}

StepResult step(const World& world, const WorldState& state, const actions::Action& action,
                const EpisodeConfig& config) {
  if (is_terminal(state, config)) throw PreconditionError("step called on a terminal state");
  StepResult r;
  r.state = state;
  if (!apply_action(world, r.state, action, config)) {
    r.state = state;
    r.invalid_action = true;
  }
  ++r.state.step_count;
  r.done = is_terminal(r.state, config);
  r.observation = render_observation(world, r.state, config);
  return r;
}

StepResult step_unparsed(const World& world, const WorldState& state, const EpisodeConfig& config) {
  if (is_terminal(state, config)) throw PreconditionError("step called on a terminal state");
  StepResult r;
  r.state = state;
  r.invalid_action = true;
  ++r.state.step_count;
  r.done = is_terminal(r.state, config);
  r.observation = render_observation(world, r.state, config);
  return r;
}

bool oracle_verify(const World& world, const Task& task, const WorldState& final_state) {
  if (!task.verifier_ref) {
    throw std::invalid_argument("unverifiable task \"" + task.task_id + "\": no verifier reference");
  }
  const SiteSpec& site = world.site(task.site_id);
  auto it = site.verifiers.find(*task.verifier_ref);
  if (it == site.verifiers.end()) {
    throw std::invalid_argument("unverifiable task \"" + task.task_id + "\": unknown verifier \"" +
                                *task.verifier_ref + "\"");
  }
  return evaluate_verifier(parse_verifier(it->second), task.site_id, final_state);
}

}  // namespace pae::web
