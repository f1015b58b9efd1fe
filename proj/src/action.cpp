#include "pae/action.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <vector>

#include "pae/util.hpp"

namespace pae::actions {
namespace {

bool starts_with_ci(std::string_view text, std::string_view prefix) {
  return text.size() >= prefix.size() && iequals(text.substr(0, prefix.size()), prefix);
}

std::string_view ltrim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return s;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// True when `text` contains something that reads as a second action, e.g.
// "CMU, Type [9] Pittsburgh" or "Click [3] Action: Click [4]".
bool contains_embedded_action(std::string_view text) {
  static constexpr std::array<std::string_view, 4> kBracketVerbs = {"click", "type", "scroll",
                                                                    "answer"};
  const std::string lower = to_lower(text);
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (i > 0 && is_word_char(lower[i - 1])) continue;
    std::string_view rest = std::string_view(lower).substr(i);
    if (rest.starts_with("action:")) return true;
    for (auto verb : kBracketVerbs) {
      if (!rest.starts_with(verb)) continue;
      std::string_view after = ltrim_view(rest.substr(verb.size()));
      if (!after.empty() && (after.front() == '[' || (verb == "answer" && after.front() == ';')))
        return true;
    }
  }
  return false;
}

[[noreturn]] void fail(ParseErrorKind kind, const std::string& message) {
  throw ActionParseError(kind, message);
}

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view word() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void expect(char c, std::string_view what) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c) {
      fail(ParseErrorKind::malformed_action,
           "expected '" + std::string(1, c) + "' " + std::string(what) + " in \"" +
               std::string(text_) + "\"");
    }
    ++pos_;
  }

  // Content between '[' and ']'.
  std::string bracketed() {
    expect('[', "before label");
    std::size_t close = text_.find(']', pos_);
    if (close == std::string_view::npos) {
      fail(ParseErrorKind::malformed_action, "unterminated '[' in \"" + std::string(text_) + "\"");
    }
    std::string inner = trim(text_.substr(pos_, close - pos_));
    pos_ = close + 1;
    return inner;
  }

  std::string_view rest() const { return text_.substr(pos_); }

  // Anything left after a complete action is either a second action or junk.
  void expect_end() {
    std::string tail = trim(rest());
    if (tail.empty()) return;
    const bool second = contains_embedded_action(tail) || tail.front() == ',' ||
                        tail.front() == ';';
    fail(second ? ParseErrorKind::multiple_actions : ParseErrorKind::malformed_action,
         "unexpected trailing text \"" + tail + "\"");
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

int parse_label(const std::string& text) {
  int value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc() || ptr != end || value < 1) {
    fail(ParseErrorKind::malformed_label, "label must be a positive integer, got \"" + text + "\"");
  }
  return value;
}

std::string parse_content(Cursor& cur, bool allow_empty) {
  std::string content = trim(cur.rest());
  if (content.empty() && !allow_empty) {
    fail(ParseErrorKind::malformed_action, "missing content after ';'");
  }
  if (contains_embedded_action(content)) {
    fail(ParseErrorKind::multiple_actions, "more than one action in \"" + content + "\"");
  }
  return content;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

}  // namespace

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::missing_action: return "MissingAction";
    case ParseErrorKind::unknown_verb: return "UnknownVerb";
    case ParseErrorKind::malformed_label: return "MalformedLabel";
    case ParseErrorKind::multiple_actions: return "MultipleActions";
    case ParseErrorKind::malformed_action: return "MalformedAction";
  }
  return "Unknown";
}

Action parse_action(std::string_view text) {
  Cursor cur(text);
  cur.skip_ws();
  std::string_view verb = cur.word();
  if (verb.empty() && trim(text).empty()) {
    fail(ParseErrorKind::missing_action, "empty action");
  }

  if (iequals(verb, "click")) {
    int label = parse_label(cur.bracketed());
    cur.expect_end();
    return Click{label};
  }
  if (iequals(verb, "type")) {
    int label = parse_label(cur.bracketed());
    cur.expect(';', "after label");
    return Type{label, parse_content(cur, false)};
  }
  if (iequals(verb, "scroll")) {
    std::string target = cur.bracketed();
    std::optional<int> label;
    if (!iequals(target, "window")) label = parse_label(target);
    cur.expect(';', "after scroll target");
    cur.skip_ws();
    std::string_view dir = cur.word();
    ScrollDirection direction;
    if (iequals(dir, "up")) {
      direction = ScrollDirection::up;
    } else if (iequals(dir, "down")) {
      direction = ScrollDirection::down;
    } else {
      fail(ParseErrorKind::malformed_action, "scroll direction must be up or down");
    }
    cur.expect_end();
    return Scroll{label, direction};
  }
  if (iequals(verb, "wait")) {
    cur.expect_end();
    return Wait{};
  }
  if (iequals(verb, "goback")) {
    cur.expect_end();
    return GoBack{};
  }
  if (iequals(verb, "google")) {
    cur.expect_end();
    return Google{};
  }
  if (iequals(verb, "answer")) {
    cur.expect(';', "after ANSWER");
    return Answer{parse_content(cur, true)};
  }
  fail(ParseErrorKind::unknown_verb, "unknown action verb \"" + std::string(verb) + "\"");
}

ActionRecord parse_agent_output(std::string_view text) {
  const auto lines = split_lines(text);
  std::optional<std::size_t> action_line;
  std::optional<std::size_t> thought_line;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view l = ltrim_view(lines[i]);
    if (starts_with_ci(l, "action:")) action_line = i;
    if (starts_with_ci(l, "thought:")) thought_line = i;
  }
  if (!action_line) fail(ParseErrorKind::missing_action, "no \"Action:\" line in output");

  ActionRecord record;
  record.raw_text = std::string(text);
  if (thought_line) {
    std::string thought(ltrim_view(lines[*thought_line]).substr(8));
    for (std::size_t i = *thought_line + 1; i < lines.size(); ++i) {
      if (starts_with_ci(ltrim_view(lines[i]), "action:")) break;
      thought += "\n";
      thought += lines[i];
    }
    record.thought = trim(thought);
  }
  record.action = parse_action(ltrim_view(lines[*action_line]).substr(7));
  return record;
}

ParseOutcome try_parse_agent_output(std::string_view text) {
  ParseOutcome out;
  try {
    out.record = parse_agent_output(text);
  } catch (const ActionParseError& e) {
    out.error = e.kind();
    out.message = e.what();
  }
  return out;
}

std::string format_action(const Action& action) {
  struct Printer {
    std::string operator()(const Click& a) const { return "Click [" + std::to_string(a.label) + "]"; }
    std::string operator()(const Type& a) const {
      return "Type [" + std::to_string(a.label) + "]; " + a.content;
    }
    std::string operator()(const Scroll& a) const {
      std::string target = a.label ? std::to_string(*a.label) : "WINDOW";
      return "Scroll [" + target + "]; " + (a.direction == ScrollDirection::up ? "up" : "down");
    }
    std::string operator()(const Wait&) const { return "Wait"; }
    std::string operator()(const GoBack&) const { return "GoBack"; }
    std::string operator()(const Google&) const { return "Google"; }
    std::string operator()(const Answer& a) const {
      return a.content.empty() ? "ANSWER;" : "ANSWER; " + a.content;
    }
  };
  return std::visit(Printer{}, action);
}

std::string format_record(const ActionRecord& record) {
  std::string out = record.thought.empty() ? "Thought:" : "Thought: " + record.thought;
  out += "\nAction: ";
  out += format_action(record.action);
  return out;
}

std::string_view verb_name(const Action& action) {
  static constexpr std::array<std::string_view, 7> kNames = {"click", "type",   "scroll", "wait",
                                                             "goback", "google", "answer"};
  return kNames[action.index()];
}

std::optional<int> action_label(const Action& action) {
  if (auto* c = std::get_if<Click>(&action)) return c->label;
  if (auto* t = std::get_if<Type>(&action)) return t->label;
  if (auto* s = std::get_if<Scroll>(&action)) return s->label;
  return std::nullopt;
}

}  // namespace pae::actions
