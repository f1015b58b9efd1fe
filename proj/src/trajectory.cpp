#include "pae/trajectory.hpp"

#include <nlohmann/json.hpp>

#include "pae/util.hpp"

namespace pae {

using nlohmann::json;

std::string_view to_string(EvaluatorKind kind) {
  switch (kind) {
    case EvaluatorKind::outcome: return "outcome";
    case EvaluatorKind::step: return "step";
    case EvaluatorKind::function: return "function";
    case EvaluatorKind::oracle: return "oracle";
    case EvaluatorKind::synthetic: return "synthetic";
  }
  return "synthetic";
}

EvaluatorKind evaluator_kind_from_string(std::string_view text) {
  if (text == "outcome") return EvaluatorKind::outcome;
  if (text == "step") return EvaluatorKind::step;
  if (text == "function") return EvaluatorKind::function;
  if (text == "oracle") return EvaluatorKind::oracle;
  if (text == "synthetic") return EvaluatorKind::synthetic;
  throw PreconditionError("unknown evaluator kind \"" + std::string(text) + "\"");
}

namespace {

constexpr std::string_view kErrorTags[] = {"low_level_skill_missing", "hallucination",
                                           "visual_understanding",    "repeated_actions",
                                           "timeout",                 "other"};

json marks_to_json(const std::vector<web::MarkedElement>& marks) {
  json arr = json::array();
  for (const auto& m : marks) {
    arr.push_back({{"label", m.label}, {"kind", web::to_string(m.kind)}, {"caption", m.caption}});
  }
  return arr;
}

std::vector<web::MarkedElement> marks_from_json(const json& arr) {
  std::vector<web::MarkedElement> out;
  for (const auto& m : arr) {
    auto kind = web::element_kind_from_string(m.at("kind").get<std::string>());
    if (!kind) throw std::runtime_error("bad element kind in observation");
    out.push_back({m.at("label").get<int>(), *kind, m.at("caption").get<std::string>()});
  }
  return out;
}

}  // namespace

std::vector<web::Observation> Trajectory::observations() const {
  std::vector<web::Observation> out;
  out.reserve(steps.size() + 1);
  for (const auto& s : steps) out.push_back(s.observation);
  out.push_back(final_observation);
  return out;
}

json to_json(const web::Observation& obs) {
  return {{"step_index", obs.step_index},
          {"page_title", obs.page_title},
          {"marked_elements", marks_to_json(obs.marked_elements)},
          {"visible_text", obs.visible_text},
          {"ax_tree", marks_to_json(obs.ax_tree)}};
}

web::Observation observation_from_json(const json& j) {
  web::Observation obs;
  obs.step_index = j.at("step_index").get<int>();
  obs.page_title = j.at("page_title").get<std::string>();
  obs.marked_elements = marks_from_json(j.at("marked_elements"));
  obs.visible_text = j.at("visible_text").get<std::vector<std::string>>();
  obs.ax_tree = marks_from_json(j.at("ax_tree"));
  return obs;
}

json to_json(const Task& task) {
  json j = {{"id", task.task_id},
            {"site_id", task.site_id},
            {"ques", task.instruction},
            {"context_kind", to_string(task.context_kind)}};
  j["verifier_ref"] = task.verifier_ref ? json(*task.verifier_ref) : json(nullptr);
  j["difficulty_hint"] = task.difficulty_hint ? json(*task.difficulty_hint) : json(nullptr);
  return j;
}

Task task_from_json(const json& j) {
  Task t;
  t.task_id = j.at("id").get<std::string>();
  t.site_id = j.contains("site_id") ? j["site_id"].get<std::string>()
                                    : j.at("web_name").get<std::string>();
  t.instruction = j.at("ques").get<std::string>();
  if (j.contains("context_kind")) {
    t.context_kind = context_kind_from_string(j["context_kind"].get<std::string>());
  }
  if (j.contains("verifier_ref") && !j["verifier_ref"].is_null()) {
    t.verifier_ref = j["verifier_ref"].get<std::string>();
  }
  if (j.contains("difficulty_hint") && !j["difficulty_hint"].is_null()) {
    t.difficulty_hint = j["difficulty_hint"].get<int>();
  }
  return t;
}

json to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"observation", to_json(s.observation)},
                     {"thought", s.record.thought},
                     {"action", actions::format_action(s.record.action)},
                     {"raw_text", s.record.raw_text},
                     {"reward", s.reward},
                     {"invalid_action", s.invalid_action}});
  }
  json j = {{"schema_version", kTrajectorySchemaVersion},
            {"task", to_json(t.task)},
            {"steps", steps},
            {"final_observation", to_json(t.final_observation)},
            {"answer", t.answer},
            {"answered", t.answered},
            {"terminal_reward", t.terminal_reward},
            {"verdict",
             {{"success", t.verdict.success},
              {"rationale", t.verdict.rationale},
              {"evaluator_kind", to_string(t.verdict.evaluator_kind)}}},
            {"seed", t.seed},
            {"iteration", t.iteration},
            {"episode_index", t.episode_index},
            {"wall_time_ms", t.wall_time_ms}};
  j["error_tag"] = t.error_tag ? json(kErrorTags[static_cast<int>(*t.error_tag)]) : json(nullptr);
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != kTrajectorySchemaVersion) {
    throw std::runtime_error("unsupported trajectory schema_version");
  }
  Trajectory t;
  t.task = task_from_json(j.at("task"));
  for (const auto& s : j.at("steps")) {
    TrajectoryStep step;
    step.observation = observation_from_json(s.at("observation"));
    step.record.thought = s.at("thought").get<std::string>();
    step.record.action = actions::parse_action(s.at("action").get<std::string>());
    step.record.raw_text = s.at("raw_text").get<std::string>();
    step.reward = s.at("reward").get<int>();
    step.invalid_action = s.at("invalid_action").get<bool>();
    t.steps.push_back(std::move(step));
  }
  t.final_observation = observation_from_json(j.at("final_observation"));
  t.answer = j.at("answer").get<std::string>();
  t.answered = j.at("answered").get<bool>();
  t.terminal_reward = j.at("terminal_reward").get<int>();
  const json& v = j.at("verdict");
  t.verdict = {v.at("success").get<bool>(), v.at("rationale").get<std::string>(),
               evaluator_kind_from_string(v.at("evaluator_kind").get<std::string>())};
  t.seed = j.at("seed").get<uint64_t>();
  t.iteration = j.at("iteration").get<int>();
  t.episode_index = j.at("episode_index").get<int>();
  t.wall_time_ms = j.at("wall_time_ms").get<double>();
  if (j.contains("error_tag") && !j["error_tag"].is_null()) {
    const auto tag = j["error_tag"].get<std::string>();
    for (int i = 0; i < 6; ++i) {
      if (kErrorTags[i] == tag) t.error_tag = static_cast<ErrorTag>(i);
    }
  }
  return t;
}

std::string trajectory_fingerprint(const Trajectory& t) {
  json j = to_json(t);
  j.erase("wall_time_ms");
  const std::string dump = j.dump();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_string(dump)));
  return std::string(buf) + ":" + std::to_string(dump.size());
}

}  // namespace pae
