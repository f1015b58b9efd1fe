#pragma once

// Agent output protocol: a "Thought:" line followed by an "Action:" line.
//
//   action  = click | type | scroll | wait | goback | google | answer ;
//   click   = "Click" "[" label "]" ;
//   type    = "Type" "[" label "]" ";" content ;
//   scroll  = "Scroll" "[" ( label | "WINDOW" ) "]" ";" ( "up" | "down" ) ;
//   wait    = "Wait" ;
//   goback  = "GoBack" ;
//   google  = "Google" ;
//   answer  = "ANSWER" ";" [ content ] ;
//   label   = positive decimal integer ;
//   content = rest of the line, trimmed, non-empty for Type ;
//
// Keywords are case-insensitive and whitespace around tokens is ignored.
// Brackets and semicolons are mandatory. See docs/action_grammar.md.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace pae::actions {

struct Click {
  int label = 1;
  bool operator==(const Click&) const = default;
};

struct Type {
  int label = 1;
  std::string content;
  bool operator==(const Type&) const = default;
};

enum class ScrollDirection { up, down };

struct Scroll {
  std::optional<int> label;  // nullopt targets the whole window
  ScrollDirection direction = ScrollDirection::down;
  bool operator==(const Scroll&) const = default;
};

struct Wait {
  bool operator==(const Wait&) const = default;
};
struct GoBack {
  bool operator==(const GoBack&) const = default;
};
struct Google {
  bool operator==(const Google&) const = default;
};

struct Answer {
  std::string content;
  bool operator==(const Answer&) const = default;
};

using Action = std::variant<Click, Type, Scroll, Wait, GoBack, Google, Answer>;

struct ActionRecord {
  std::string thought;
  Action action;
  std::string raw_text;
};

enum class ParseErrorKind {
  missing_action,
  unknown_verb,
  malformed_label,
  multiple_actions,
  malformed_action,
};

std::string_view to_string(ParseErrorKind kind);

class ActionParseError : public std::runtime_error {
 public:
  ActionParseError(ParseErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ParseErrorKind kind() const { return kind_; }

 private:
  ParseErrorKind kind_;
};

/// Extracts the last "Thought:" and last "Action:" segments of free-form
/// model output and parses the action. Throws ActionParseError.
ActionRecord parse_agent_output(std::string_view text);

/// Parses a bare action string such as "Click [7]".
Action parse_action(std::string_view text);

/// Non-throwing variant for rollout code, where a parse failure becomes an
/// invalid-action step.
struct ParseOutcome {
  std::optional<ActionRecord> record;
  std::optional<ParseErrorKind> error;
  std::string message;
};
ParseOutcome try_parse_agent_output(std::string_view text);

std::string format_action(const Action& action);

/// Canonical "Thought: ...\nAction: ..." rendering.
std::string format_record(const ActionRecord& record);

/// Lowercase verb name: click, type, scroll, wait, goback, google, answer.
std::string_view verb_name(const Action& action);

/// Label the action refers to, if any.
std::optional<int> action_label(const Action& action);

}  // namespace pae::actions
