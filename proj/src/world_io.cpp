#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pae/util.hpp"
#include "pae/verifier.hpp"
#include "pae/webworld.hpp"

namespace pae::web {
namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

class Reader {
 public:
  std::vector<ValidationIssue> issues;

  void issue(const std::string& path, const std::string& message) {
    issues.push_back({path, message});
  }

  const json* field(const json& obj, const char* key, const std::string& path, bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) issue(path + "." + key, "required field missing");
      return nullptr;
    }
    return &*it;
  }

  std::string str(const json& obj, const char* key, const std::string& path, bool required = true) {
    const json* v = field(obj, key, path, required);
    if (!v) return {};
    if (!v->is_string()) {
      issue(path + "." + key, "expected string");
      return {};
    }
    return v->get<std::string>();
  }

  int integer(const json& obj, const char* key, const std::string& path, int fallback) {
    const json* v = field(obj, key, path, true);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      issue(path + "." + key, "expected integer");
      return fallback;
    }
    return v->get<int>();
  }

  const json* array(const json& obj, const char* key, const std::string& path, bool required) {
    const json* v = field(obj, key, path, required);
    if (v && !v->is_array()) {
      issue(path + "." + key, "expected array");
      return nullptr;
    }
    return v;
  }

  const json* object(const json& obj, const char* key, const std::string& path, bool required) {
    const json* v = field(obj, key, path, required);
    if (v && !v->is_object()) {
      issue(path + "." + key, "expected object");
      return nullptr;
    }
    return v;
  }

  std::vector<std::string> strings(const json& arr, const std::string& path) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (arr[i].is_string()) {
        out.push_back(arr[i].get<std::string>());
      } else {
        issue(path + "[" + std::to_string(i) + "]", "expected string");
      }
    }
    return out;
  }

  Effect effect(const json& e, const std::string& path) {
    if (!e.is_object() || e.size() != 1) {
      issue(path, "effect must be an object with exactly one of go_to, mutate_session, submit_search");
      return {};
    }
    if (e.contains("go_to")) {
      if (!e["go_to"].is_string()) {
        issue(path + ".go_to", "expected string");
        return {};
      }
      return GoTo{e["go_to"].get<std::string>()};
    }
    if (e.contains("submit_search")) return SubmitSearch{};
    if (e.contains("mutate_session")) {
      const json& m = e["mutate_session"];
      const std::string mpath = path + ".mutate_session";
      if (!m.is_object()) {
        issue(mpath, "expected object");
        return {};
      }
      MutateSession ms;
      ms.var = str(m, "var", mpath);
      const std::string op = str(m, "op", mpath);
      if (op == "set") ms.op = SessionOp::set;
      else if (op == "add") ms.op = SessionOp::add;
      else if (op == "remove") ms.op = SessionOp::remove;
      else if (op == "clear") ms.op = SessionOp::clear;
      else issue(mpath + ".op", "unknown op \"" + op + "\"");
      if (ms.op != SessionOp::clear) ms.value = str(m, "value", mpath);
      return ms;
    }
    issue(path, "unknown effect");
    return {};
  }

  PageSpec page(const json& p, const std::string& path) {
    PageSpec page;
    if (!p.is_object()) {
      issue(path, "expected object");
      return page;
    }
    page.page_id = str(p, "page_id", path);
    page.title = str(p, "title", path);
    page.page_height = integer(p, "page_height", path, 1);
    if (const json* text = array(p, "static_text", path, false)) {
      for (std::size_t i = 0; i < text->size(); ++i) {
        const std::string tpath = path + ".static_text[" + std::to_string(i) + "]";
        const json& block = (*text)[i];
        if (!block.is_object()) {
          issue(tpath, "expected object with row and text");
          continue;
        }
        page.static_text.push_back({integer(block, "row", tpath, 0), str(block, "text", tpath)});
      }
    }
    if (const json* elements = array(p, "elements", path, false)) {
      for (std::size_t i = 0; i < elements->size(); ++i) {
        const std::string epath = path + ".elements[" + std::to_string(i) + "]";
        const json& e = (*elements)[i];
        if (!e.is_object()) {
          issue(epath, "expected object");
          continue;
        }
        ElementSpec el;
        el.element_id = str(e, "id", epath);
        const std::string kind = str(e, "kind", epath);
        if (auto k = element_kind_from_string(kind)) {
          el.kind = *k;
        } else {
          issue(epath + ".kind", "unknown element kind \"" + kind + "\"");
        }
        el.caption = str(e, "caption", epath);
        el.row = integer(e, "row", epath, 0);
        if (auto it = e.find("effect"); it != e.end() && !it->is_null()) {
          el.effect = effect(*it, epath + ".effect");
        }
        page.elements.push_back(std::move(el));
      }
    }
    return page;
  }

  SiteSpec site(const json& s, const std::string& path) {
    SiteSpec site;
    if (!s.is_object()) {
      issue(path, "expected object");
      return site;
    }
    site.site_id = str(s, "site_id", path);
    site.display_name = str(s, "display_name", path);
    site.descriptor = str(s, "descriptor", path, false);
    site.entry_page = str(s, "entry_page", path);
    if (const json* schema = array(s, "session_schema", path, false)) {
      for (std::size_t i = 0; i < schema->size(); ++i) {
        const std::string vpath = path + ".session_schema[" + std::to_string(i) + "]";
        const json& v = (*schema)[i];
        if (!v.is_object()) {
          issue(vpath, "expected object");
          continue;
        }
        SessionVar var;
        var.name = str(v, "name", vpath);
        if (const json* init = array(v, "initial", vpath, false)) {
          var.initial = strings(*init, vpath + ".initial");
        }
        site.session_schema.push_back(std::move(var));
      }
    }
    if (const json* index = object(s, "search_index", path, false)) {
      for (auto& [key, value] : index->items()) {
        const std::string kpath = path + ".search_index." + key;
        if (!value.is_array()) {
          issue(kpath, "expected array of page ids");
          continue;
        }
        site.search_index[to_lower(key)] = strings(value, kpath);
      }
    }
    if (const json* verifiers = object(s, "verifiers", path, false)) {
      for (auto& [key, value] : verifiers->items()) {
        if (!value.is_string()) {
          issue(path + ".verifiers." + key, "expected program string");
          continue;
        }
        site.verifiers[key] = value.get<std::string>();
      }
    }
    if (const json* pages = array(s, "pages", path, false)) {
      for (std::size_t i = 0; i < pages->size(); ++i) {
        site.pages.push_back(page((*pages)[i], path + ".pages[" + std::to_string(i) + "]"));
      }
    }
    return site;
  }
};

std::pair<int, int> line_and_column(std::string_view doc, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < doc.size(); ++i) {
    if (doc[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::link: return "link";
    case ElementKind::button: return "button";
    case ElementKind::textbox: return "textbox";
    case ElementKind::select_option: return "select_option";
  }
  return "link";
}

std::optional<ElementKind> element_kind_from_string(std::string_view text) {
  if (text == "link") return ElementKind::link;
  if (text == "button") return ElementKind::button;
  if (text == "textbox") return ElementKind::textbox;
  if (text == "select_option") return ElementKind::select_option;
  return std::nullopt;
}

const PageSpec* SiteSpec::find_page(std::string_view page_id) const {
  for (const auto& p : pages) {
    if (p.page_id == page_id) return &p;
  }
  return nullptr;
}

const PageSpec& SiteSpec::page(std::string_view page_id) const {
  if (const auto* p = find_page(page_id)) return *p;
  throw PreconditionError("unknown page \"" + std::string(page_id) + "\" in site " + site_id);
}

const SiteSpec* World::find_site(std::string_view site_id) const {
  for (const auto& s : sites) {
    if (s.site_id == site_id) return &s;
  }
  return nullptr;
}

const SiteSpec& World::site(std::string_view site_id) const {
  if (const auto* s = find_site(site_id)) return *s;
  throw PreconditionError("unknown site_id \"" + std::string(site_id) + "\"");
}

std::vector<ValidationIssue> validate_world(const World& world) {
  std::vector<ValidationIssue> issues;
  auto add = [&](std::string path, std::string message) {
    issues.push_back({std::move(path), std::move(message)});
  };

  std::set<std::string> site_ids;
  for (std::size_t si = 0; si < world.sites.size(); ++si) {
    const SiteSpec& site = world.sites[si];
    const std::string spath = "sites[" + std::to_string(si) + "]";
    if (!site_ids.insert(site.site_id).second) {
      add(spath + ".site_id", "duplicate site_id \"" + site.site_id + "\"");
    }
    if (!site.find_page(site.entry_page)) {
      add(spath + ".entry_page", "entry_page missing: \"" + site.entry_page + "\" is not a page");
    }

    std::set<std::string> vars;
    for (const auto& v : site.session_schema) vars.insert(v.name);

    std::set<std::string> page_ids;
    for (std::size_t pi = 0; pi < site.pages.size(); ++pi) {
      const PageSpec& page = site.pages[pi];
      const std::string ppath = spath + ".pages[" + std::to_string(pi) + "]";
      if (!page_ids.insert(page.page_id).second) {
        add(ppath + ".page_id", "duplicate page_id \"" + page.page_id + "\"");
      }
      if (page.page_height < 1) add(ppath + ".page_height", "page_height must be >= 1");
      for (std::size_t ti = 0; ti < page.static_text.size(); ++ti) {
        const int row = page.static_text[ti].row;
        if (row < 0 || row >= page.page_height) {
          add(ppath + ".static_text[" + std::to_string(ti) + "].row", "row outside page");
        }
      }
      std::set<std::string> element_ids;
      for (std::size_t ei = 0; ei < page.elements.size(); ++ei) {
        const ElementSpec& el = page.elements[ei];
        const std::string epath = ppath + ".elements[" + std::to_string(ei) + "]";
        if (!element_ids.insert(el.element_id).second) {
          add(epath + ".id", "duplicate element id \"" + el.element_id + "\"");
        }
        if (el.row < 0 || el.row >= page.page_height) {
          add(epath + ".row", "row " + std::to_string(el.row) + " outside [0, page_height)");
        }
        if (ei > 0 && el.row < page.elements[ei - 1].row) {
          add(epath + ".row", "elements must be listed in document (row) order");
        }
        if (auto* go = std::get_if<GoTo>(&el.effect)) {
          if (!site.find_page(go->page_id)) {
            add(epath + ".effect.go_to", "link target \"" + go->page_id + "\" does not exist");
          }
        } else if (auto* m = std::get_if<MutateSession>(&el.effect)) {
          if (!vars.contains(m->var)) {
            add(epath + ".effect.mutate_session.var",
                "session variable \"" + m->var + "\" is not declared in session_schema");
          }
        } else if (std::holds_alternative<SubmitSearch>(el.effect) &&
                   el.kind != ElementKind::textbox) {
          add(epath + ".effect", "submit_search is only valid on textbox elements");
        }
      }
    }
    for (const auto& [key, targets] : site.search_index) {
      for (const auto& t : targets) {
        if (!site.find_page(t)) {
          add(spath + ".search_index." + key, "search target \"" + t + "\" does not exist");
        }
      }
    }
    for (const auto& [id, text] : site.verifiers) {
      try {
        auto program = parse_verifier(text);
        if (!verifier_targets_exist(program, site)) {
          add(spath + ".verifiers." + id, "verifier \"" + text + "\" references a missing target");
        }
      } catch (const VerifierSyntaxError& e) {
        add(spath + ".verifiers." + id, e.what());
      }
    }
  }
  return issues;
}

LoadResult load_world(std::string_view document) {
  LoadResult result;
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_and_column(document, e.byte == 0 ? 0 : e.byte - 1);
    result.issues.push_back({"line " + std::to_string(line) + ", column " + std::to_string(col),
                             std::string("parse error: ") + e.what()});
    return result;
  }

  Reader reader;
  if (!doc.is_object()) {
    result.issues.push_back({"$", "document must be a JSON object"});
    return result;
  }
  const json* version = reader.field(doc, "schema_version", "$", true);
  if (version && (!version->is_number_integer() || version->get<int>() != kSchemaVersion)) {
    reader.issue("$.schema_version", "unsupported schema_version (expected 1)");
  }
  World world;
  world.name = reader.str(doc, "world", "$", false);
  if (const json* sites = reader.array(doc, "sites", "$", true)) {
    for (std::size_t i = 0; i < sites->size(); ++i) {
      world.sites.push_back(reader.site((*sites)[i], "sites[" + std::to_string(i) + "]"));
    }
  }
  result.issues = std::move(reader.issues);
  if (!result.issues.empty()) return result;

  result.issues = validate_world(world);
  result.world = std::move(world);
  return result;
}

LoadResult load_world_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    LoadResult r;
    r.issues.push_back({path.string(), "cannot open file"});
    return r;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_world(buffer.str());
}

World load_world_or_throw(const std::filesystem::path& path) {
  LoadResult r = load_world_file(path);
  if (!r.ok()) {
    std::string message = "invalid world " + path.string() + ":";
    for (const auto& i : r.issues) message += "\n  " + i.path + ": " + i.message;
    throw std::runtime_error(message);
  }
  return std::move(*r.world);
}

}  // namespace pae::web
