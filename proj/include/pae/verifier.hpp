#pragma once

// Verifier mini-language, one predicate per program:
//
//   page_is:<page_id>
//   answer_equals:<text>        exact match after trimming whitespace
//   answer_normalized:<text>    lowercase, punctuation stripped
//   session:<var> contains <value>
//   session:<var> equals <value>
//   session:<var> empty

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "pae/webworld.hpp"

namespace pae::web {

struct PageIs {
  std::string page_id;
  bool operator==(const PageIs&) const = default;
};

struct AnswerEquals {
  std::string expected;
  bool normalized = false;
  bool operator==(const AnswerEquals&) const = default;
};

enum class SessionTest { contains, equals, empty };

struct SessionPredicate {
  std::string var;
  SessionTest test = SessionTest::contains;
  std::string value;
  bool operator==(const SessionPredicate&) const = default;
};

/// Syntactically valid by construction; targets may still not exist.
using VerifierProgram = std::variant<PageIs, AnswerEquals, SessionPredicate>;

class VerifierSyntaxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

VerifierProgram parse_verifier(std::string_view text);
std::string format_verifier(const VerifierProgram& program);

/// Evaluates against a final state. `site_id` is the task's site; a page
/// predicate only holds on that site.
bool evaluate_verifier(const VerifierProgram& program, std::string_view site_id,
                       const WorldState& state);

/// True when every page/session target the program names exists in the site.
bool verifier_targets_exist(const VerifierProgram& program, const SiteSpec& site);

}  // namespace pae::web
