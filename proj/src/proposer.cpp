#include "pae/proposer.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "pae/prompts.hpp"
#include "pae/solver.hpp"
#include "pae/trajectory.hpp"
#include "pae/util.hpp"
#include "pae/verifier.hpp"

namespace pae::proposer {
namespace {

constexpr int kMinDifficulty = 2;
constexpr int kMaxDifficulty = 7;

const std::vector<std::string> kListingPhrases = {
    "Browse the {T} category", "Show me everything in the {T} section", "Open the {T} category",
    "Navigate to the {T} section"};
const std::vector<std::string> kPagePhrases = {"Go to the {T} page", "Open the {T} page",
                                               "Navigate to {T}", "Show me the {T} page"};
const std::vector<std::string> kReportPhrases = {
    "Find {T} and report its {K}", "What is the {K} of {T}?", "Look up {T} and tell me the {K}",
    "Report the {K} listed for {T}"};
const std::vector<std::string> kSessionPhrases = {"Add {T} to the {V}", "Put {T} in my {V}",
                                                  "Save {T} to my {V}"};

std::string fill(std::string phrase, const std::string& key, const std::string& value) {
  const auto pos = phrase.find(key);
  if (pos != std::string::npos) phrase.replace(pos, key.size(), value);
  return phrase;
}

bool is_listing(const web::SiteSpec& site, const web::PageSpec& page) {
  int links = 0;
  for (const auto& el : page.elements) {
    if (auto* go = std::get_if<web::GoTo>(&el.effect); go && go->page_id != site.entry_page) ++links;
  }
  return links >= 2;
}

std::optional<std::string> verifier_id_for(const web::SiteSpec& site, const std::string& program) {
  for (const auto& [id, text] : site.verifiers) {
    if (trim(text) == program) return id;
  }
  return std::nullopt;
}

bool nameable(const std::string& title, const std::set<std::string>& vocab) {
  const auto tokens = keywords(title);
  return !tokens.empty() &&
         std::all_of(tokens.begin(), tokens.end(), [&](const auto& t) { return vocab.contains(t); });
}

}  // namespace

std::string DemoPage::render() const {
  std::string out = "[page] " + title + "\n";
  for (const auto& t : visible_text) out += "  text: " + t + "\n";
  for (const auto& c : captions) out += "  element: " + c + "\n";
  return out;
}

void ContextInfo::validate() const {
  if (kind == ContextKind::user_demos && demo_pages.empty()) {
    throw PreconditionError("user_demos context needs at least one demo page");
  }
  if (kind == ContextKind::name_only && !demo_pages.empty()) {
    throw PreconditionError("name_only context must not carry demo pages");
  }
}

DemoPage summarize_page(const web::World& world, const std::string& site_id,
                        const std::string& page_id) {
  const web::SiteSpec& site = world.site(site_id);
  site.page(page_id);
  web::WorldState state;
  state.site_id = site_id;
  state.current_page = page_id;
  const auto obs = web::render_observation(world, state, web::EpisodeConfig{});
  DemoPage demo;
  demo.title = obs.page_title;
  demo.visible_text = obs.visible_text;
  for (const auto& m : obs.marked_elements) demo.captions.push_back(m.caption);
  return demo;
}

ContextInfo make_context(const web::World& world, const std::string& site_id, ContextKind kind,
                         int k_demo, uint64_t seed) {
  const web::SiteSpec& site = world.site(site_id);
  ContextInfo ctx;
  ctx.kind = kind;
  ctx.site_id = site.site_id;
  ctx.site_name = site.display_name;
  if (!site.descriptor.empty()) ctx.descriptor = site.descriptor;
  if (kind == ContextKind::user_demos) {
    if (k_demo < 1) throw PreconditionError("k_demo must be >= 1 for user_demos context");
    ctx.demo_pages.push_back(summarize_page(world, site_id, site.entry_page));
    std::vector<std::string> others;
    for (const auto& p : site.pages) {
      if (p.page_id != site.entry_page) others.push_back(p.page_id);
    }
    Rng rng(seed);
    for (int i = 1; i < k_demo && !others.empty(); ++i) {
      const std::size_t pick = rng.below(others.size());
      ctx.demo_pages.push_back(summarize_page(world, site_id, others[pick]));
      others.erase(others.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  return ctx;
}

std::set<std::string> context_vocabulary(const ContextInfo& context) {
  std::set<std::string> vocab;
  auto add = [&](std::string_view text) {
    for (auto& t : tokenize(text)) vocab.insert(std::move(t));
  };
  add(context.site_name);
  if (context.descriptor) add(*context.descriptor);
  for (const auto& d : context.demo_pages) {
    add(d.title);
    for (const auto& t : d.visible_text) add(t);
    for (const auto& c : d.captions) add(c);
  }
  return vocab;
}

std::vector<TemplateTask> enumerate_templates(const web::World& world, const ContextInfo& context,
                                              const web::EpisodeConfig& config) {
  context.validate();
  const web::SiteSpec& site = world.site(context.site_id);
  const auto vocab = context_vocabulary(context);

  std::vector<TemplateTask> out;
  int index = 0;
  auto consider = [&](TemplateFamily family, const std::string& entity, std::string instruction,
                      const std::string& program) {
    const int id = index++;
    if (!nameable(entity, vocab)) return;
    auto vid = verifier_id_for(site, program);
    if (!vid) return;
    Task task;
    task.task_id = site.site_id + "--" + std::to_string(id);
    task.site_id = site.site_id;
    task.instruction = std::move(instruction);
    task.context_kind = context.kind;
    task.verifier_ref = *vid;
    const auto solution = solver::solve(world, task, config);
    const int steps = static_cast<int>(solution.actions.size());
    if (!solution.verified || steps > kMaxDifficulty) return;
    task.difficulty_hint = std::max(kMinDifficulty, steps);
    out.push_back({std::move(task), family, entity});
  };

  for (const auto& page : site.pages) {
    if (page.page_id == site.entry_page) continue;
    const auto& phrases = is_listing(site, page) ? kListingPhrases : kPagePhrases;
    for (const auto& p : phrases) {
      consider(TemplateFamily::navigate, page.title, fill(p, "{T}", page.title),
               "page_is:" + page.page_id);
    }
  }
  for (const auto& page : site.pages) {
    for (const auto& block : page.static_text) {
      const auto colon = block.text.find(": ");
      if (colon == std::string::npos) continue;
      const std::string key = to_lower(block.text.substr(0, colon));
      const std::string value = trim(block.text.substr(colon + 2));
      for (const auto& p : kReportPhrases) {
        consider(TemplateFamily::report, page.title, fill(fill(p, "{T}", page.title), "{K}", key),
                 "answer_equals:" + value);
      }
    }
  }
  for (const auto& page : site.pages) {
    for (const auto& el : page.elements) {
      auto* m = std::get_if<web::MutateSession>(&el.effect);
      if (!m || m->op != web::SessionOp::add) continue;
      for (const auto& p : kSessionPhrases) {
        consider(TemplateFamily::session, page.title,
                 fill(fill(p, "{T}", page.title), "{V}", m->var),
                 "session:" + m->var + " contains " + m->value);
      }
    }
  }
  return out;
}

TaskPool propose_scripted(const web::World& world, const ContextInfo& context, int n,
                          uint64_t seed, const web::EpisodeConfig& config) {
  if (n < 1) throw PreconditionError("propose_scripted: n must be >= 1");
  TaskPool space;
  for (auto& t : enumerate_templates(world, context, config)) space.tasks.push_back(std::move(t.task));
  space = dedup_pool(std::move(space));

  Rng rng(seed);
  auto& tasks = space.tasks;
  for (std::size_t i = tasks.size(); i > 1; --i) std::swap(tasks[i - 1], tasks[rng.below(i)]);

  TaskPool pool;
  pool.generation_seed = seed;
  pool.dedup_removed = space.dedup_removed;
  if (static_cast<std::size_t>(n) > tasks.size()) {
    pool.truncated = true;
    pool.warnings.push_back("requested " + std::to_string(n) + " tasks but the template space for " +
                            context.site_id + " holds only " + std::to_string(tasks.size()));
  } else {
    tasks.resize(static_cast<std::size_t>(n));
  }
  pool.tasks = std::move(tasks);
  return pool;
}

TaskPool propose_world(const web::World& world, ContextKind kind, int n_total, uint64_t seed,
                       const std::vector<std::string>& site_ids, int k_demo) {
  std::vector<std::string> sites = site_ids;
  if (sites.empty()) {
    for (const auto& s : world.sites) sites.push_back(s.site_id);
  }
  if (sites.empty()) throw PreconditionError("propose_world: no sites");
  if (n_total < static_cast<int>(sites.size())) {
    throw PreconditionError("propose_world: n_total must give every site at least one task");
  }
  TaskPool merged;
  merged.generation_seed = seed;
  const int base = n_total / static_cast<int>(sites.size());
  int extra = n_total % static_cast<int>(sites.size());
  for (const auto& site_id : sites) {
    const int n = base + (extra-- > 0 ? 1 : 0);
    const uint64_t site_seed = derive_seed(seed, hash_string(site_id));
    auto ctx = make_context(world, site_id, kind, k_demo, site_seed);
    auto pool = propose_scripted(world, ctx, n, site_seed);
    merged.truncated = merged.truncated || pool.truncated;
    merged.dedup_removed += pool.dedup_removed;
    merged.warnings.insert(merged.warnings.end(), pool.warnings.begin(), pool.warnings.end());
    merged.tasks.insert(merged.tasks.end(), pool.tasks.begin(), pool.tasks.end());
  }
  const int before = merged.dedup_removed;
  merged = dedup_pool(std::move(merged));
  merged.dedup_removed += before;
  return merged;
}

std::vector<Task> parse_proposer_reply(const std::string& reply, const ContextInfo& context,
                                       int* malformed_lines) {
  std::string_view body = reply;
  if (auto pos = body.rfind("Output:"); pos != std::string_view::npos) body = body.substr(pos + 7);

  std::vector<Task> tasks;
  std::unordered_set<std::string> ids;
  int malformed = 0;
  std::size_t start = 0;
  while (start < body.size()) {
    std::size_t nl = body.find('\n', start);
    if (nl == std::string_view::npos) nl = body.size();
    const std::string line = trim(body.substr(start, nl - start));
    start = nl + 1;
    if (line.empty() || line.front() != '{') continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string ques = trim(j.at("ques").get<std::string>());
      if (ques.empty()) throw std::runtime_error("empty ques");
      Task t;
      t.site_id = context.site_id;
      t.instruction = ques;
      t.context_kind = context.kind;
      t.task_id = j.contains("id") && j["id"].is_string()
                      ? j["id"].get<std::string>()
                      : context.site_id + "--remote-" + std::to_string(tasks.size() + 1);
      while (!ids.insert(t.task_id).second) t.task_id += "'";
      tasks.push_back(std::move(t));
    } catch (const std::exception&) {
      ++malformed;
    }
  }
  if (malformed_lines) *malformed_lines = malformed;
  return tasks;
}

TaskPool propose_remote(const ContextInfo& context, int n, remote::ChatBackend& backend) {
  if (n < 1) throw PreconditionError("propose_remote: n must be >= 1");
  context.validate();
  std::vector<std::string> demos;
  for (const auto& d : context.demo_pages) demos.push_back(d.render());
  const std::string prompt = prompts::proposer_prompt(
      context.site_id, context.site_name, context.descriptor.value_or(""), demos, n);
  const std::string reply = backend.complete({{"user", prompt}});

  int malformed = 0;
  TaskPool pool;
  pool.tasks = parse_proposer_reply(reply, context, &malformed);
  if (malformed > 0) {
    pool.warnings.push_back("skipped " + std::to_string(malformed) + " malformed task line(s)");
  }
  if (pool.tasks.size() > static_cast<std::size_t>(n)) pool.tasks.resize(static_cast<std::size_t>(n));
  pool = dedup_pool(std::move(pool));
  if (pool.tasks.size() < static_cast<std::size_t>(n)) {
    pool.warnings.push_back("backend produced " + std::to_string(pool.tasks.size()) + " of " +
                            std::to_string(n) + " requested tasks");
  }
  return pool;
}

TaskPool dedup_pool(TaskPool pool) {
  std::unordered_set<std::string> seen;
  std::vector<Task> kept;
  kept.reserve(pool.tasks.size());
  for (auto& t : pool.tasks) {
    if (seen.insert(normalize_text(t.instruction)).second) {
      kept.push_back(std::move(t));
    } else {
      ++pool.dedup_removed;
    }
  }
  pool.tasks = std::move(kept);
  return pool;
}

void write_pool_jsonl(const std::filesystem::path& path, const TaskPool& pool) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : pool.tasks) {
    nlohmann::json j = to_json(t);
    j["schema_version"] = kPoolSchemaVersion;
    j["web_name"] = t.site_id;
    out << j.dump() << '\n';
  }
}

TaskPool read_pool_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  TaskPool pool;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.value("schema_version", kPoolSchemaVersion) != kPoolSchemaVersion) {
        throw std::runtime_error("unsupported schema_version");
      }
      pool.tasks.push_back(task_from_json(j));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pool;
}

}  // namespace pae::proposer
