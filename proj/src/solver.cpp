#include "pae/solver.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "pae/util.hpp"
#include "pae/verifier.hpp"

namespace pae::solver {
namespace {

using web::ElementSpec;
using web::PageSpec;
using web::SiteSpec;

bool all_tokens_in(std::string_view text, const std::set<std::string>& vocab) {
  const auto tokens = keywords(text);
  return !tokens.empty() &&
         std::all_of(tokens.begin(), tokens.end(), [&](const auto& t) { return vocab.contains(t); });
}

std::optional<std::string> search_hit(const SiteSpec& site, const std::string& token) {
  auto it = site.search_index.find(token);
  if (it == site.search_index.end() || it->second.empty()) return std::nullopt;
  return it->second.front();
}

struct Edge {
  const ElementSpec* element = nullptr;
  std::optional<std::string> typed;  // set for search edges
  std::string to;
};

std::vector<Edge> edges_from(const SiteSpec& site, const PageSpec& page,
                             const std::vector<std::string>& task_keywords) {
  std::vector<Edge> clicks, searches;
  for (const auto& el : page.elements) {
    if (auto* go = std::get_if<web::GoTo>(&el.effect); go && el.kind != web::ElementKind::textbox) {
      clicks.push_back({&el, std::nullopt, go->page_id});
    } else if (std::holds_alternative<web::SubmitSearch>(el.effect)) {
      for (const auto& kw : task_keywords) {
        if (auto hit = search_hit(site, kw)) searches.push_back({&el, kw, *hit});
      }
    }
  }
  clicks.insert(clicks.end(), searches.begin(), searches.end());
  return clicks;
}

// First edge on a shortest path from `from` to `to`.
std::optional<Edge> first_edge(const SiteSpec& site, const std::string& from, const std::string& to,
                               const std::vector<std::string>& task_keywords) {
  std::map<std::string, Edge> first;
  std::set<std::string> seen{from};
  std::deque<std::string> queue{from};
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    for (const Edge& e : edges_from(site, site.page(cur), task_keywords)) {
      if (!seen.insert(e.to).second) continue;
      first[e.to] = cur == from ? e : first[cur];
      if (e.to == to) return first[e.to];
      queue.push_back(e.to);
    }
  }
  return std::nullopt;
}

// Click/type the element if it is in view, otherwise scroll toward it.
actions::Action act_on(const ElementSpec& target, const std::optional<std::string>& typed,
                       const web::World& world, const web::WorldState& state,
                       const web::EpisodeConfig& config) {
  const auto visible = web::visible_elements(world, state, config);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    if (visible[i] == &target) {
      const int label = static_cast<int>(i) + 1;
      if (typed) return actions::Type{label, *typed};
      return actions::Click{label};
    }
  }
  const auto dir = target.row < state.viewport_top ? actions::ScrollDirection::up
                                                    : actions::ScrollDirection::down;
  return actions::Scroll{std::nullopt, dir};
}

}  // namespace

Goal resolve_goal(const web::World& world, const Task& task) {
  if (!task.verifier_ref) {
    throw std::invalid_argument("scripted solver needs a verifiable task: " + task.task_id);
  }
  const SiteSpec& site = world.site(task.site_id);
  auto vit = site.verifiers.find(*task.verifier_ref);
  if (vit == site.verifiers.end()) {
    throw std::invalid_argument("unknown verifier \"" + *task.verifier_ref + "\"");
  }
  const auto program = web::parse_verifier(vit->second);
  const auto kw = keywords(task.instruction);
  const std::set<std::string> vocab(kw.begin(), kw.end());

  Goal goal;
  if (auto* p = std::get_if<web::PageIs>(&program)) {
    goal.target_page = p->page_id;
    return goal;
  }
  if (auto* a = std::get_if<web::AnswerEquals>(&program)) {
    // The page whose title the instruction names and that shows the value.
    for (const auto& page : site.pages) {
      if (!all_tokens_in(page.title, vocab)) continue;
      for (const auto& block : page.static_text) {
        auto colon = block.text.find(": ");
        if (colon == std::string::npos) continue;
        if (trim(block.text.substr(colon + 2)) == trim(a->expected) &&
            all_tokens_in(block.text.substr(0, colon), vocab)) {
          goal.target_page = page.page_id;
          goal.answer = trim(a->expected);
          return goal;
        }
      }
    }
    throw std::invalid_argument("no page shows the expected answer for " + task.task_id);
  }
  const auto& s = std::get<web::SessionPredicate>(program);
  if (s.test == web::SessionTest::contains) {
    for (const auto& page : site.pages) {
      for (const auto& el : page.elements) {
        auto* m = std::get_if<web::MutateSession>(&el.effect);
        if (m && m->var == s.var && m->value == s.value &&
            (m->op == web::SessionOp::add || m->op == web::SessionOp::set)) {
          goal.target_page = page.page_id;
          goal.element_id = el.element_id;
          return goal;
        }
      }
    }
  }
  throw std::invalid_argument("no element satisfies the session predicate for " + task.task_id);
}

actions::Action next_action(const web::World& world, const Task& task, const Goal& goal,
                            const web::WorldState& state, const web::EpisodeConfig& config) {
  const SiteSpec& site = world.site(state.site_id);
  if (state.site_id != task.site_id) return actions::GoBack{};

  if (state.current_page == goal.target_page) {
    if (goal.element_id) {
      const auto& elements = site.page(goal.target_page).elements;
      auto el = std::find_if(elements.begin(), elements.end(),
                             [&](const ElementSpec& e) { return e.element_id == *goal.element_id; });
      if (el == elements.end()) throw std::logic_error("goal element missing from page");
      const auto& m = std::get<web::MutateSession>(el->effect);
      auto it = state.session.find(m.var);
      const bool done = it != state.session.end() &&
                        std::find(it->second.begin(), it->second.end(), m.value) != it->second.end();
      if (!done) return act_on(*el, std::nullopt, world, state, config);
    }
    return actions::Answer{goal.answer};
  }

  const auto edge = first_edge(site, state.current_page, goal.target_page, keywords(task.instruction));
  if (!edge) return actions::Answer{"N/A"};
  return act_on(*edge->element, edge->typed, world, state, config);
}

Solution solve(const web::World& world, const Task& task, const web::EpisodeConfig& config) {
  const Goal goal = resolve_goal(world, task);
  auto [state, obs] = web::reset(world, task.site_id, task, config, 0);
  Solution sol;
  while (!web::is_terminal(state, config)) {
    auto action = next_action(world, task, goal, state, config);
    sol.actions.push_back(action);
    state = web::step(world, state, action, config).state;
  }
  sol.verified = web::oracle_verify(world, task, state);
  sol.final_state = std::move(state);
  return sol;
}

}  // namespace pae::solver
