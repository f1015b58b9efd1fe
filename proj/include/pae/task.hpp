#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace pae {

enum class ContextKind { name_only, user_demos, remote };

std::string_view to_string(ContextKind kind);
ContextKind context_kind_from_string(std::string_view text);

/// A proposed task. Scripted tasks always carry a verifier_ref into their
/// site's verifier table; remotely proposed tasks never do.
struct Task {
  std::string task_id;
  std::string site_id;
  std::string instruction;
  ContextKind context_kind = ContextKind::name_only;
  std::optional<std::string> verifier_ref;
  std::optional<int> difficulty_hint;

  bool operator==(const Task&) const = default;
};

}  // namespace pae
