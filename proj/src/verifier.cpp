#include "pae/verifier.hpp"

#include <algorithm>

#include "pae/util.hpp"

namespace pae::web {
namespace {

std::string_view after_prefix(std::string_view text, std::string_view prefix) {
  return text.substr(prefix.size());
}

}  // namespace

VerifierProgram parse_verifier(std::string_view text) {
  const std::string program = trim(text);
  std::string_view p = program;
  if (p.starts_with("page_is:")) {
    std::string page = trim(after_prefix(p, "page_is:"));
    if (page.empty()) throw VerifierSyntaxError("page_is: missing page id");
    return PageIs{page};
  }
  if (p.starts_with("answer_equals:")) {
    return AnswerEquals{trim(after_prefix(p, "answer_equals:")), false};
  }
  if (p.starts_with("answer_normalized:")) {
    return AnswerEquals{trim(after_prefix(p, "answer_normalized:")), true};
  }
  if (p.starts_with("session:")) {
    std::string body = trim(after_prefix(p, "session:"));
    const auto sp = body.find(' ');
    if (sp == std::string::npos) throw VerifierSyntaxError("session: expected '<var> <test>'");
    SessionPredicate pred;
    pred.var = body.substr(0, sp);
    std::string rest = trim(std::string_view(body).substr(sp + 1));
    if (rest == "empty") {
      pred.test = SessionTest::empty;
      return pred;
    }
    const auto sp2 = rest.find(' ');
    const std::string op = rest.substr(0, sp2);
    if (sp2 == std::string::npos) throw VerifierSyntaxError("session: missing value");
    pred.value = trim(std::string_view(rest).substr(sp2 + 1));
    if (op == "contains") {
      pred.test = SessionTest::contains;
    } else if (op == "equals") {
      pred.test = SessionTest::equals;
    } else {
      throw VerifierSyntaxError("session: unknown test \"" + op + "\"");
    }
    if (pred.value.empty()) throw VerifierSyntaxError("session: missing value");
    return pred;
  }
  throw VerifierSyntaxError("unknown verifier \"" + program + "\"");
}

std::string format_verifier(const VerifierProgram& program) {
  if (auto* p = std::get_if<PageIs>(&program)) return "page_is:" + p->page_id;
  if (auto* a = std::get_if<AnswerEquals>(&program)) {
    return (a->normalized ? "answer_normalized:" : "answer_equals:") + a->expected;
  }
  const auto& s = std::get<SessionPredicate>(program);
  switch (s.test) {
    case SessionTest::contains: return "session:" + s.var + " contains " + s.value;
    case SessionTest::equals: return "session:" + s.var + " equals " + s.value;
    case SessionTest::empty: return "session:" + s.var + " empty";
  }
  return {};
}

bool evaluate_verifier(const VerifierProgram& program, std::string_view site_id,
                       const WorldState& state) {
  if (auto* p = std::get_if<PageIs>(&program)) {
    return state.site_id == site_id && state.current_page == p->page_id;
  }
  if (auto* a = std::get_if<AnswerEquals>(&program)) {
    if (!state.answered) return false;
    if (a->normalized) return normalize_text(*state.answered) == normalize_text(a->expected);
    return trim(*state.answered) == trim(a->expected);
  }
  const auto& s = std::get<SessionPredicate>(program);
  auto it = state.session.find(s.var);
  const SessionValue empty;
  const SessionValue& value = it == state.session.end() ? empty : it->second;
  switch (s.test) {
    case SessionTest::contains:
      return std::find(value.begin(), value.end(), s.value) != value.end();
    case SessionTest::equals: return value.size() == 1 && value.front() == s.value;
    case SessionTest::empty: return value.empty();
  }
  return false;
}

bool verifier_targets_exist(const VerifierProgram& program, const SiteSpec& site) {
  if (auto* p = std::get_if<PageIs>(&program)) return site.find_page(p->page_id) != nullptr;
  if (auto* s = std::get_if<SessionPredicate>(&program)) {
    return std::any_of(site.session_schema.begin(), site.session_schema.end(),
                       [&](const SessionVar& v) { return v.name == s->var; });
  }
  return true;
}

}  // namespace pae::web
