#include "pae/policy.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pae/prompts.hpp"
#include "pae/solver.hpp"
#include "pae/util.hpp"

namespace pae::policy {

using actions::Action;

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::random: return "random";
    case PolicyKind::scripted_solver: return "scripted_solver";
    case PolicyKind::learnable: return "learnable";
    case PolicyKind::remote: return "remote";
  }
  return "random";
}

PolicyKind policy_kind_from_string(std::string_view text) {
  if (text == "random") return PolicyKind::random;
  if (text == "scripted_solver" || text == "scripted") return PolicyKind::scripted_solver;
  if (text == "learnable") return PolicyKind::learnable;
  if (text == "remote") return PolicyKind::remote;
  throw PreconditionError("unknown policy kind \"" + std::string(text) + "\"");
}

namespace {

std::string act_name(const Action& a) {
  if (auto* s = std::get_if<actions::Scroll>(&a)) {
    return s->direction == actions::ScrollDirection::up ? "scroll_up" : "scroll_down";
  }
  if (auto* ans = std::get_if<actions::Answer>(&a)) {
    return ans->content == "done" ? "answer_done" : "answer_val";
  }
  return std::string(actions::verb_name(a));
}

const web::MarkedElement* marked(const web::Observation& obs, std::optional<int> label) {
  if (!label || *label < 1 || *label > static_cast<int>(obs.marked_elements.size())) return nullptr;
  return &obs.marked_elements[static_cast<std::size_t>(*label - 1)];
}

std::string bucket(std::size_t n) { return n >= 2 ? "2+" : std::to_string(n); }

std::size_t count_in(const std::vector<std::string>& tokens, const std::set<std::string>& set) {
  return static_cast<std::size_t>(
      std::count_if(tokens.begin(), tokens.end(), [&](const auto& t) { return set.contains(t); }));
}

struct KeyValue {
  std::string key;
  std::string value;
};

std::vector<KeyValue> key_values(const web::Observation& obs) {
  std::vector<KeyValue> out;
  for (const auto& line : obs.visible_text) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos || colon == 0) continue;
    std::string value = trim(std::string_view(line).substr(colon + 2));
    if (!value.empty()) out.push_back({line.substr(0, colon), std::move(value)});
  }
  return out;
}

std::vector<std::string> unique_keywords(std::string_view text) {
  std::vector<std::string> out;
  for (auto& k : keywords(text)) {
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(std::move(k));
  }
  return out;
}

// Everything about the input that does not depend on the candidate.
struct InputContext {
  std::vector<std::string> kw;
  std::set<std::string> kwset;
  std::set<std::string> entity;
  std::set<std::string> heads;
  std::vector<std::string> title;
  std::string title_match;
  std::string last_verb = "none";
  std::vector<std::string> last_caption;
  std::string last_caption_match;
  const actions::ActionRecord* last = nullptr;
  std::vector<KeyValue> kvs;
  bool key_mentioned = false;
  std::string best_caption_match;
  std::string step;

  explicit InputContext(const PolicyInput& in) {
    kw = unique_keywords(in.task.instruction);
    kwset = {kw.begin(), kw.end()};

    // Capitalized runs after the first word name entities; the run's last
    // word is its head noun.
    std::istringstream words(in.task.instruction);
    std::string w;
    std::vector<std::string> run;
    bool first = true;
    auto flush = [&] {
      if (!run.empty()) heads.insert(run.back());
      run.clear();
    };
    while (words >> w) {
      const bool cap = std::isupper(static_cast<unsigned char>(w.front())) != 0;
      const auto toks = tokenize(w);
      if (cap && !first && !toks.empty()) {
        for (const auto& t : toks) {
          entity.insert(t);
          run.push_back(t);
        }
      } else {
        flush();
      }
      if (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back()))) flush();
      first = false;
    }
    flush();

    title = keywords(in.observation.page_title);
    const auto tm = count_in(title, kwset);
    title_match = tm == 0 ? "none" : tm == title.size() ? "all" : "partial";

    if (!in.history.empty()) {
      const auto& h = in.history.back();
      last = &h.record;
      last_verb = act_name(h.record.action);
      last_caption = keywords(h.caption);
    }
    last_caption_match = bucket(count_in(last_caption, kwset));

    kvs = key_values(in.observation);
    for (const auto& kv : kvs) {
      const auto kt = keywords(kv.key);
      if (!kt.empty() && count_in(kt, kwset) == kt.size()) key_mentioned = true;
    }
    std::size_t best = 0;
    for (const auto& m : in.observation.marked_elements) {
      if (m.kind == web::ElementKind::textbox) continue;
      best = std::max(best, count_in(keywords(m.caption), kwset));
    }
    best_caption_match = bucket(best);
    step = std::to_string(std::min(in.step_index, 4));
  }
};

std::vector<std::string> features_for(const InputContext& ctx, const PolicyInput& in,
                                      const Action& a, bool cot) {
  std::vector<std::string> f;
  const std::string v = act_name(a);
  f.push_back("b|" + v);
  f.push_back("s|" + v + "|" + ctx.step);
  f.push_back("h|" + v + "|" + ctx.last_verb);
  if (ctx.last && ctx.last->action == a) f.push_back("rep|" + v);
  for (const auto& t : ctx.last_caption) f.push_back("lc|" + v + "|" + t);
  for (const auto& k : ctx.kw) f.push_back("t|" + v + "|" + k);

  if (auto* click = std::get_if<actions::Click>(&a)) {
    const auto* m = marked(in.observation, click->label);
    const auto ct = m ? keywords(m->caption) : std::vector<std::string>{};
    if (m) f.push_back("k|" + v + "|" + std::string(web::to_string(m->kind)));
    for (const auto& t : ct) f.push_back("c|" + v + "|" + t);
    for (const auto& k : ctx.kw) {
      for (const auto& t : ct) f.push_back("p|" + k + "|" + t);
    }
    if (cot) {
      const auto n = count_in(ct, ctx.kwset);
      f.push_back("cm|" + v + "|" + bucket(n));
      if (n > 0 && n == ct.size()) f.push_back("cma|" + v);
      f.push_back("cmlc|" + bucket(n) + "|" + ctx.last_caption_match);
    }
  } else if (auto* type = std::get_if<actions::Type>(&a)) {
    f.push_back("ty|" + type->content);
    if (cot) {
      const std::string role = ctx.heads.contains(type->content)    ? "head"
                               : ctx.entity.contains(type->content) ? "entity"
                                                                    : "other";
      f.push_back("te|" + role);
      f.push_back("tet|" + role + "|" + ctx.title_match);
    }
  } else {
    for (const auto& k : ctx.kw) {
      for (const auto& t : ctx.title) f.push_back("pa|" + v + "|" + k + "|" + t);
    }
    if (auto* ans = std::get_if<actions::Answer>(&a); ans && v == "answer_val") {
      std::vector<std::string> kt;
      for (const auto& kv : ctx.kvs) {
        if (kv.value == ans->content) kt = keywords(kv.key);
      }
      for (const auto& t : kt) f.push_back("a|" + t);
      for (const auto& k : ctx.kw) {
        for (const auto& t : kt) f.push_back("pk|" + k + "|" + t);
      }
      if (cot) {
        const bool km = !kt.empty() && count_in(kt, ctx.kwset) == kt.size();
        f.push_back(std::string("km|") + (km ? "1" : "0"));
        f.push_back(std::string("kmtm|") + (km ? "1" : "0") + "|" + ctx.title_match);
      }
    }
    if (cot) {
      const std::string kv = ctx.key_mentioned ? "1" : "0";
      f.push_back("tm|" + v + "|" + ctx.title_match);
      f.push_back("tmkv|" + v + "|" + ctx.title_match + "|" + kv);
      f.push_back("lcm|" + v + "|" + ctx.last_caption_match);
      f.push_back("bm|" + v + "|" + ctx.best_caption_match + "|" + ctx.title_match);
    }
  }
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

std::vector<double> softmax(const PolicyParams& params,
                            const std::vector<std::vector<std::string>>& features) {
  std::vector<double> logits;
  logits.reserve(features.size());
  for (const auto& fs : features) {
    double s = 0.0;
    for (const auto& name : fs) s += params.weight(name);
    logits.push_back(s / params.temperature);
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - mx);
    z += l;
  }
  for (auto& l : logits) l /= z;
  return logits;
}

std::size_t sample_index(const std::vector<double>& probs, uint64_t seed) {
  Rng rng(seed);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

}  // namespace

PolicyInput make_input(const Task& task, const web::Observation& observation,
                       const std::vector<TrajectoryStep>& prior, bool google_enabled) {
  PolicyInput in;
  in.task = task;
  in.observation = observation;
  in.step_index = static_cast<int>(prior.size());
  in.google_enabled = google_enabled;
  for (const auto& s : prior) {
    const auto* m = marked(s.observation, actions::action_label(s.record.action));
    in.history.push_back({s.observation.page_title, m ? m->caption : "", s.record});
  }
  return in;
}

std::vector<Action> candidate_actions(const PolicyInput& input) {
  std::vector<Action> out;
  const auto kw = unique_keywords(input.task.instruction);
  for (const auto& m : input.observation.marked_elements) {
    if (m.kind == web::ElementKind::textbox) {
      for (const auto& k : kw) out.push_back(actions::Type{m.label, k});
    } else {
      out.push_back(actions::Click{m.label});
    }
  }
  out.push_back(actions::Scroll{std::nullopt, actions::ScrollDirection::down});
  out.push_back(actions::Scroll{std::nullopt, actions::ScrollDirection::up});
  out.push_back(actions::Wait{});
  out.push_back(actions::GoBack{});
  if (input.google_enabled) out.push_back(actions::Google{});
  out.push_back(actions::Answer{"done"});
  for (const auto& kv : key_values(input.observation)) {
    Action a = actions::Answer{kv.value};
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(std::move(a));
  }
  return out;
}

std::vector<std::string> candidate_features(const PolicyInput& input, const Action& action,
                                            bool cot) {
  return features_for(InputContext(input), input, action, cot);
}

double PolicyParams::weight(const std::string& feature) const {
  auto it = weights.find(feature);
  return it == weights.end() ? 0.0 : it->second;
}

void PolicyParams::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw PreconditionError("policy temperature must be positive");
  }
  for (const auto& [k, w] : weights) {
    if (!std::isfinite(w)) throw PreconditionError("non-finite weight for feature " + k);
  }
}

Scored score(const PolicyParams& params, const PolicyInput& input) {
  Scored s;
  const InputContext ctx(input);
  s.candidates = candidate_actions(input);
  for (const auto& a : s.candidates) s.features.push_back(features_for(ctx, input, a, params.cot_enabled));
  s.probs = softmax(params, s.features);
  return s;
}

std::string make_thought(const PolicyInput& input, const Action& action) {
  const auto kw = unique_keywords(input.task.instruction);
  const std::set<std::string> kwset(kw.begin(), kw.end());
  std::string keyword = kw.empty() ? "nothing specific" : kw.front();
  const auto* m = marked(input.observation, actions::action_label(action));
  std::vector<std::string> probe;
  if (m) {
    probe = keywords(m->caption);
  } else if (auto* t = std::get_if<actions::Type>(&action)) {
    probe = {t->content};
  } else {
    probe = keywords(input.observation.page_title);
  }
  for (const auto& t : probe) {
    if (kwset.contains(t)) {
      keyword = t;
      break;
    }
  }
  std::string what = act_name(action);
  std::replace(what.begin(), what.end(), '_', ' ');
  if (m) what += " element " + std::to_string(m->label) + " (" + m->caption + ")";
  if (auto* a = std::get_if<actions::Answer>(&action)) what = "answer " + a->content;
  return "I will " + what + " because the task mentions " + keyword;
}

PolicyOutput RandomPolicy::act(const PolicyInput& input, uint64_t seed) const {
  const auto cands = candidate_actions(input);
  Rng rng(seed);
  PolicyOutput out;
  out.record.action = cands[rng.below(cands.size())];
  out.record.raw_text = actions::format_record(out.record);
  return out;
}

PolicyOutput ScriptedPolicy::act(const PolicyInput& input, uint64_t) const {
  std::vector<Action> plan;
  {
    std::lock_guard lock(mu_);
    auto it = plans_.find(input.task.task_id);
    if (it == plans_.end()) {
      it = plans_.emplace(input.task.task_id, solver::solve(world_, input.task, config_).actions).first;
    }
    plan = it->second;
  }
  PolicyOutput out;
  const auto i = static_cast<std::size_t>(input.step_index);
  out.record.action = i < plan.size() ? plan[i] : Action{actions::Answer{"N/A"}};
  out.record.thought = "Following the plan.";
  out.record.raw_text = actions::format_record(out.record);
  return out;
}

LearnablePolicy::LearnablePolicy(PolicyParams params, bool greedy)
    : params_(std::move(params)), greedy_(greedy) {
  params_.validate();
}

PolicyOutput LearnablePolicy::act(const PolicyInput& input, uint64_t seed) const {
  const Scored s = score(params_, input);
  std::size_t pick = 0;
  if (greedy_) {
    for (std::size_t i = 1; i < s.probs.size(); ++i) {
      if (s.probs[i] > s.probs[pick]) pick = i;
    }
  } else {
    pick = sample_index(s.probs, seed);
  }
  PolicyOutput out;
  out.record.action = s.candidates[pick];
  if (params_.cot_enabled) out.record.thought = make_thought(input, out.record.action);
  out.record.raw_text = actions::format_record(out.record);
  return out;
}

PolicyOutput RemotePolicy::act(const PolicyInput& input, uint64_t) const {
  std::vector<std::string> previous;
  for (const auto& h : input.history) previous.push_back(actions::format_action(h.record.action));
  std::string reply;
  {
    std::lock_guard lock(mu_);
    reply = backend_.complete(
        {{"system", prompts::agent_system_prompt(input.google_enabled)},
         {"user", prompts::agent_step_message(input.task.instruction, input.observation, previous)}});
  }
  PolicyOutput out;
  auto parsed = actions::try_parse_agent_output(reply);
  if (parsed.record) {
    out.record = std::move(*parsed.record);
  } else {
    out.record.action = actions::Wait{};
    out.record.raw_text = reply;
    out.parse_failed = true;
    out.error = parsed.message;
  }
  return out;
}

std::optional<TrainingPair> make_pair(const PolicyInput& input, const Action& taken, bool cot) {
  const InputContext ctx(input);
  const auto cands = candidate_actions(input);
  auto it = std::find(cands.begin(), cands.end(), taken);
  if (it == cands.end()) return std::nullopt;
  TrainingPair p;
  p.chosen = static_cast<std::size_t>(it - cands.begin());
  for (const auto& a : cands) p.candidate_features.push_back(features_for(ctx, input, a, cot));
  return p;
}

double nll(const PolicyParams& params, const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) total -= std::log(softmax(params, p.candidate_features)[p.chosen]);
  return total / static_cast<double>(pairs.size());
}

namespace {

template <typename Map>
void accumulate_gradient(const PolicyParams& params, const TrainingPair& p, double scale, Map& g) {
  const auto probs = softmax(params, p.candidate_features);
  for (std::size_t a = 0; a < probs.size(); ++a) {
    const double coef = (probs[a] - (a == p.chosen ? 1.0 : 0.0)) * scale / params.temperature;
    for (const auto& f : p.candidate_features[a]) g[f] += coef;
  }
}

}  // namespace

std::map<std::string, double> nll_gradient(const PolicyParams& params,
                                           const std::vector<TrainingPair>& pairs) {
  std::map<std::string, double> g;
  for (const auto& p : pairs) accumulate_gradient(params, p, 1.0 / static_cast<double>(pairs.size()), g);
  return g;
}

PolicyParams update_from_pairs(const PolicyParams& params, const std::vector<TrainingPair>& pairs,
                               const UpdateConfig& config) {
  params.validate();
  if (config.epochs < 0) throw PreconditionError("epochs must be >= 0");
  if (!(config.learning_rate >= 0.0)) throw PreconditionError("learning_rate must be >= 0");
  PolicyParams out = params;
  if (pairs.empty()) return out;
  const std::size_t batch = config.batch_size <= 0 ? pairs.size()
                                                   : static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(pairs.size());
  for (int e = 0; e < config.epochs; ++e) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(config.seed, e));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::unordered_map<std::string, double> g;
      for (std::size_t i = start; i < end; ++i) {
        accumulate_gradient(out, pairs[order[i]], 1.0 / static_cast<double>(end - start), g);
      }
      for (const auto& [f, d] : g) out.weights[f] -= config.learning_rate * d;
    }
  }
  return out;
}

std::vector<TrainingPair> pairs_from_trajectory(const Trajectory& trajectory, bool cot,
                                                bool google_enabled) {
  std::vector<TrainingPair> out;
  std::vector<TrajectoryStep> prior;
  for (const auto& s : trajectory.steps) {
    const auto in = make_input(trajectory.task, s.observation, prior, google_enabled);
    if (auto p = make_pair(in, s.record.action, cot)) out.push_back(std::move(*p));
    prior.push_back(s);
  }
  return out;
}

PolicyParams update_from_demos(const PolicyParams& params, const std::vector<Trajectory>& successful,
                               const UpdateConfig& config) {
  std::vector<TrainingPair> pairs;
  for (const auto& t : successful) {
    if (t.terminal_reward != 1) {
      throw PreconditionError("update_from_demos: trajectory for " + t.task.task_id +
                              " has terminal reward " + std::to_string(t.terminal_reward));
    }
    auto p = pairs_from_trajectory(t, params.cot_enabled, config.google_enabled);
    pairs.insert(pairs.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  return update_from_pairs(params, pairs, config);
}

// Binary layout: "PAEP" u32(version) then fields {u16 tag, u32 length, payload}.
namespace {

enum : uint16_t { kTagTemperature = 1, kTagCot = 2, kTagWeights = 3 };

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put(out, std::bit_cast<uint64_t>(d)); }

void put_field(std::string& out, uint16_t tag, const std::string& payload) {
  put(out, tag);
  put(out, static_cast<uint32_t>(payload.size()));
  out += payload;
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get<uint64_t>()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw std::runtime_error("params file truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string params_to_bytes(const PolicyParams& params) {
  std::string out = "PAEP";
  put(out, kParamsFormatVersion);
  std::string payload;
  put_f64(payload, params.temperature);
  put_field(out, kTagTemperature, payload);
  put_field(out, kTagCot, std::string(1, params.cot_enabled ? '\1' : '\0'));

  std::vector<std::pair<std::string, double>> sorted(params.weights.begin(), params.weights.end());
  std::sort(sorted.begin(), sorted.end());
  payload.clear();
  put(payload, static_cast<uint32_t>(sorted.size()));
  for (const auto& [k, w] : sorted) {
    put(payload, static_cast<uint32_t>(k.size()));
    payload += k;
    put_f64(payload, w);
  }
  put_field(out, kTagWeights, payload);
  return out;
}

PolicyParams params_from_bytes(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(4) != "PAEP") throw std::runtime_error("not a params file (bad magic)");
  const auto version = r.get<uint32_t>();
  if (version != kParamsFormatVersion) {
    throw std::runtime_error("unsupported params version " + std::to_string(version));
  }
  PolicyParams p;
  while (!r.done()) {
    const auto tag = r.get<uint16_t>();
    const auto len = r.get<uint32_t>();
    Reader field(r.bytes(len));
    switch (tag) {
      case kTagTemperature: p.temperature = field.get_f64(); break;
      case kTagCot: p.cot_enabled = field.get<uint8_t>() != 0; break;
      case kTagWeights: {
        const auto n = field.get<uint32_t>();
        for (uint32_t i = 0; i < n; ++i) {
          std::string key(field.bytes(field.get<uint32_t>()));
          p.weights[std::move(key)] = field.get_f64();
        }
        break;
      }
      default: break;  // unknown fields from newer writers are skipped
    }
  }
  p.validate();
  return p;
}

void save_params(const std::filesystem::path& path, const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << params_to_bytes(params);
}

PolicyParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return params_from_bytes(buf.str());
}

nlohmann::json params_to_json(const PolicyParams& params) {
  nlohmann::json w = nlohmann::json::object();
  std::map<std::string, double> sorted(params.weights.begin(), params.weights.end());
  for (const auto& [k, v] : sorted) w[k] = v;
  return {{"schema_version", kParamsFormatVersion},
          {"temperature", params.temperature},
          {"cot_enabled", params.cot_enabled},
          {"weights", w}};
}

}  // namespace pae::policy
