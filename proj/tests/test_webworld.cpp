#include <doctest.h>

#include <nlohmann/json.hpp>

#include "pae/solver.hpp"
#include "pae/util.hpp"
#include "pae/verifier.hpp"
#include "pae/webworld.hpp"
#include "test_support.hpp"

using namespace pae;
using namespace pae::web;
using pae::testing::fixture_world;
using pae::testing::make_task;

namespace {

nlohmann::json tiny_world() {
  return nlohmann::json::parse(R"({
    "schema_version": 1, "world": "tiny",
    "sites": [{
      "site_id": "s", "display_name": "Tiny", "descriptor": "", "entry_page": "home",
      "session_schema": [{"name": "cart", "initial": []}],
      "search_index": {"widget": ["item"]},
      "verifiers": {"nav_item": "page_is:item", "add": "session:cart contains w1"},
      "pages": [
        {"page_id": "home", "title": "Home", "page_height": 30,
         "static_text": [{"row": 0, "text": "Welcome"}],
         "elements": [
           {"id": "q", "kind": "textbox", "caption": "Search", "row": 1, "effect": {"submit_search": true}},
           {"id": "to_item", "kind": "link", "caption": "Widget", "row": 3, "effect": {"go_to": "item"}},
           {"id": "far", "kind": "link", "caption": "Far link", "row": 25, "effect": {"go_to": "item"}}
         ]},
        {"page_id": "item", "title": "Widget", "page_height": 10,
         "static_text": [{"row": 0, "text": "Price: 5"}],
         "elements": [
           {"id": "back", "kind": "link", "caption": "Home", "row": 1, "effect": {"go_to": "home"}},
           {"id": "add", "kind": "button", "caption": "Add to cart", "row": 2,
            "effect": {"mutate_session": {"var": "cart", "op": "add", "value": "w1"}}}
         ]}
      ]}]})");
}

bool has_issue(const LoadResult& r, const std::string& needle) {
  for (const auto& i : r.issues) {
    if ((i.path + ": " + i.message).find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("webworld") {
  TEST_CASE("fixture world loads cleanly") {
    const auto r = load_world_file(testing::source_path("data/worlds/threeshop.json"));
    CHECK(r.ok());
    REQUIRE(r.world);
    CHECK(r.world->sites.size() == 3);
    for (const auto& s : r.world->sites) CHECK(s.pages.size() == 24);
  }

  TEST_CASE("validation reports problems with field paths") {
    CHECK(load_world(tiny_world().dump()).ok());

    auto j = tiny_world();
    j["sites"][0]["pages"][0]["elements"][1]["effect"]["go_to"] = "nowhere";
    auto r = load_world(j.dump());
    CHECK_FALSE(r.ok());
    CHECK(has_issue(r, "link target \"nowhere\" does not exist"));
    CHECK(has_issue(r, "sites[0].pages[0].elements[1]"));

    j = tiny_world();
    j["sites"][0]["entry_page"] = "lobby";
    CHECK(has_issue(load_world(j.dump()), "entry_page missing"));

    j = tiny_world();
    j["sites"][0]["pages"][1]["page_id"] = "home";
    CHECK(has_issue(load_world(j.dump()), "duplicate page_id"));

    j = tiny_world();
    j["sites"][0]["pages"][0]["elements"][2]["row"] = 40;
    CHECK(has_issue(load_world(j.dump()), "outside"));

    j = tiny_world();
    j["sites"][0]["verifiers"]["bad"] = "page_is:ghost";
    CHECK(has_issue(load_world(j.dump()), "missing target"));

    j = tiny_world();
    j["sites"][0]["verifiers"]["bad"] = "looks_fine:maybe";
    CHECK_FALSE(load_world(j.dump()).ok());

    j = tiny_world();
    j["schema_version"] = 2;
    CHECK(has_issue(load_world(j.dump()), "schema_version"));
  }

  TEST_CASE("syntax errors carry line and column") {
    const auto r = load_world("{\n  \"schema_version\": 1,\n  \"sites\": [,]\n}");
    CHECK_FALSE(r.ok());
    CHECK(has_issue(r, "line 3"));
  }

  TEST_CASE("reset, click, go back") {
    const World w = *load_world(tiny_world().dump()).world;
    const EpisodeConfig cfg;
    const Task task = make_task("t", "s", "Open the widget", "nav_item");
    auto [s0, o0] = reset(w, "s", task, cfg, 1);
    CHECK(s0.current_page == "home");
    CHECK(o0.step_index == 0);
    REQUIRE(o0.marked_elements.size() == 2);  // the far link is out of view
    CHECK(o0.marked_elements[1].caption == "Widget");

    const auto r1 = step(w, s0, actions::Click{2}, cfg);
    CHECK(r1.state.current_page == "item");
    CHECK_FALSE(r1.invalid_action);
    CHECK(s0.current_page == "home");  // input untouched
    CHECK(oracle_verify(w, task, r1.state));

    const auto r2 = step(w, r1.state, actions::GoBack{}, cfg);
    CHECK(r2.state.current_page == "home");
    CHECK(r2.state.viewport_top == 0);
    CHECK(r2.state.step_count == 2);
  }

  TEST_CASE("invalid actions consume a step and change nothing else") {
    const World w = *load_world(tiny_world().dump()).world;
    const EpisodeConfig cfg;
    auto s0 = reset(w, "s", make_task("t", "s", "x", "nav_item"), cfg, 1).state;
    for (const actions::Action& a : std::vector<actions::Action>{
             actions::Click{9}, actions::Click{1}, actions::Type{2, "x"}, actions::Google{}}) {
      const auto r = step(w, s0, a, cfg);
      CHECK(r.invalid_action);
      CHECK(r.state.step_count == 1);
      auto expect = s0;
      expect.step_count = 1;
      CHECK(r.state == expect);
    }
  }

  TEST_CASE("typing into the search box follows the index") {
    const World w = *load_world(tiny_world().dump()).world;
    const EpisodeConfig cfg;
    auto s0 = reset(w, "s", make_task("t", "s", "x", "nav_item"), cfg, 1).state;
    const auto hit = step(w, s0, actions::Type{1, "blue widget"}, cfg);
    CHECK(hit.state.current_page == "item");
    CHECK(hit.state.session.at("typed:q") == SessionValue{"blue widget"});
    const auto miss = step(w, s0, actions::Type{1, "gizmo"}, cfg);
    CHECK(miss.state.current_page == "home");
    CHECK_FALSE(miss.invalid_action);
  }

  TEST_CASE("scrolling is clamped to the page") {
    const World w = *load_world(tiny_world().dump()).world;
    EpisodeConfig cfg;
    cfg.horizon = 50;
    auto s = reset(w, "s", make_task("t", "s", "x", "nav_item"), cfg, 1).state;
    s = step(w, s, actions::Scroll{std::nullopt, actions::ScrollDirection::down}, cfg).state;
    CHECK(s.viewport_top == 10);  // 30 rows, 20 visible
    const auto obs = render_observation(w, s, cfg);
    REQUIRE(obs.marked_elements.size() == 1);
    CHECK(obs.marked_elements[0].caption == "Far link");
    s = step(w, s, actions::Scroll{std::nullopt, actions::ScrollDirection::up}, cfg).state;
    s = step(w, s, actions::Scroll{std::nullopt, actions::ScrollDirection::up}, cfg).state;
    CHECK(s.viewport_top == 0);
  }

  TEST_CASE("answer and horizon end the episode") {
    const World w = *load_world(tiny_world().dump()).world;
    EpisodeConfig cfg;
    cfg.horizon = 3;
    auto s = reset(w, "s", make_task("t", "s", "x", "nav_item"), cfg, 1).state;
    auto r = step(w, s, actions::Answer{"5"}, cfg);
    CHECK(r.done);
    CHECK(r.state.answered == std::optional<std::string>("5"));
    CHECK_THROWS_AS(step(w, r.state, actions::Wait{}, cfg), PreconditionError);
    for (int i = 0; i < 3; ++i) {
      r = step(w, s, actions::Wait{}, cfg);
      s = r.state;
    }
    CHECK(r.done);
    CHECK(is_terminal(s, cfg));
  }

  TEST_CASE("session verifiers see button effects") {
    const World w = *load_world(tiny_world().dump()).world;
    const EpisodeConfig cfg;
    const Task task = make_task("t", "s", "Add the widget to the cart", "add");
    auto s = reset(w, "s", task, cfg, 1).state;
    CHECK_FALSE(oracle_verify(w, task, s));
    s = step(w, s, actions::Click{2}, cfg).state;
    s = step(w, s, actions::Click{2}, cfg).state;
    CHECK(oracle_verify(w, task, s));
  }

  TEST_CASE("oracle refuses tasks without a verifier") {
    Task t = make_task("t", "shopsite", "x", "nav_cat_patio");
    t.verifier_ref.reset();
    const auto s = reset(fixture_world(), "shopsite", t, EpisodeConfig{}, 0).state;
    CHECK_THROWS_AS(oracle_verify(fixture_world(), t, s), std::invalid_argument);
  }

  TEST_CASE("the scripted solver completes the patio task") {
    const Task t = make_task("p", "shopsite", "Browse the Patio category", "nav_cat_patio");
    const auto sol = solver::solve(fixture_world(), t, EpisodeConfig{});
    CHECK(sol.verified);
    CHECK(oracle_verify(fixture_world(), t, sol.final_state));
  }

  TEST_CASE("observation text rendering is stable") {
    Observation o;
    o.step_index = 2;
    o.page_title = "Widget";
    o.visible_text = {"Price: 5"};
    o.marked_elements = {{1, ElementKind::link, "Home"}};
    o.ax_tree = o.marked_elements;
    const std::string text = render_observation_text(o);
    CHECK(text.starts_with("```observation\n"));
    CHECK(text.find("[1] link: Home\n") != std::string::npos);
    CHECK(text == render_observation_text(o));
  }

  TEST_CASE("verifier language round trips") {
    for (const std::string p : {"page_is:home", "answer_equals:$5.00", "answer_normalized:new york",
                                "session:cart contains item_1", "session:cart equals a",
                                "session:cart empty"}) {
      CHECK(format_verifier(parse_verifier(p)) == p);
    }
    CHECK_THROWS_AS(parse_verifier("session:cart holds x"), VerifierSyntaxError);
    CHECK_THROWS_AS(parse_verifier("page_is:"), VerifierSyntaxError);
  }
}
