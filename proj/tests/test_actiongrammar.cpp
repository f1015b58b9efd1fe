#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "pae/action.hpp"
#include "pae/util.hpp"
#include "test_support.hpp"

using namespace pae;
using namespace pae::actions;

namespace {

Action random_action(Rng& rng) {
  static const std::vector<std::string> words = {"CMU", "Pittsburgh", "desk lamp", "$34.99", "06516",
                                                 "a; b", "N/A", "x y  z", "Oak Desk"};
  const int label = 1 + static_cast<int>(rng.below(60));
  const auto& w = words[rng.below(words.size())];
  switch (rng.below(7)) {
    case 0: return Click{label};
    case 1: return Type{label, w};
    case 2:
      return Scroll{rng.bernoulli(0.5) ? std::optional<int>(label) : std::nullopt,
                    rng.bernoulli(0.5) ? ScrollDirection::up : ScrollDirection::down};
    case 3: return Wait{};
    case 4: return GoBack{};
    case 5: return Google{};
    default: return Answer{rng.bernoulli(0.2) ? "" : w};
  }
}

}  // namespace

TEST_SUITE("actiongrammar") {
  TEST_CASE("golden corpus") {
    std::ifstream in(testing::source_path("tests/data/action_golden.jsonl"));
    REQUIRE(in);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto c = nlohmann::json::parse(line);
      const std::string input = c["input"];
      const bool full = c["mode"] == "output";
      CAPTURE(input);
      ++n;
      if (c.contains("error")) {
        try {
          if (full) {
            parse_agent_output(input);
          } else {
            parse_action(input);
          }
          FAIL("expected a parse error");
        } catch (const ActionParseError& e) {
          CHECK(std::string(to_string(e.kind())) == c["error"].get<std::string>());
        }
        continue;
      }
      if (full) {
        const auto rec = parse_agent_output(input);
        CHECK(format_action(rec.action) == c["canonical"].get<std::string>());
        CHECK(rec.thought == c["thought"].get<std::string>());
        CHECK(rec.raw_text == input);
      } else {
        CHECK(format_action(parse_action(input)) == c["canonical"].get<std::string>());
      }
    }
    CHECK(n >= 40);
  }

  TEST_CASE("random round trip through canonical text") {
    Rng rng(2024);
    for (int i = 0; i < 10000; ++i) {
      ActionRecord rec;
      rec.action = random_action(rng);
      rec.thought = rng.bernoulli(0.3) ? "" : "step " + std::to_string(i);
      const std::string text = format_record(rec);
      const auto back = parse_agent_output(text);
      REQUIRE(back.action == rec.action);
      REQUIRE(back.thought == rec.thought);
      REQUIRE(format_record(back) == text);
    }
  }

  TEST_CASE("canonical record layout") {
    CHECK(format_record({"x", Click{7}, ""}) == "Thought: x\nAction: Click [7]");
    CHECK(format_record({"", Answer{""}, ""}) == "Thought:\nAction: ANSWER;");
  }

  TEST_CASE("verb names and labels") {
    CHECK(verb_name(Click{1}) == "click");
    CHECK(verb_name(Scroll{}) == "scroll");
    CHECK(verb_name(Answer{"a"}) == "answer");
    CHECK(action_label(Type{4, "a"}) == 4);
    CHECK_FALSE(action_label(Scroll{std::nullopt, ScrollDirection::up}).has_value());
    CHECK_FALSE(action_label(Wait{}).has_value());
  }

  TEST_CASE("try_parse reports the error kind instead of throwing") {
    const auto bad = try_parse_agent_output("Thought: hm\nAction: Click [x]");
    CHECK_FALSE(bad.record.has_value());
    CHECK(bad.error == ParseErrorKind::malformed_label);
    const auto good = try_parse_agent_output("Action: Wait");
    REQUIRE(good.record.has_value());
    CHECK(good.record->action == Action{Wait{}});
  }
}
