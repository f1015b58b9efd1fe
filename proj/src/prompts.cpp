#include "pae/prompts.hpp"

namespace pae::prompts {

std::string proposer_prompt(const std::string& site_id, const std::string& site_name,
                            const std::string& descriptor,
                            const std::vector<std::string>& demo_pages, int n) {
  std::string p;
  p += "{\"web_name\": \"" + site_id + "\", \"id\": \"" + site_id +
       "--1\", \"ques\": \"Open the main listing page and report how many entries it shows.\"}\n\n";
  p += "You are helping build training tasks for a web navigation agent that will practice on the "
       "website \"" + site_name + "\".\n";
  if (!descriptor.empty()) p += "About the website: " + descriptor + "\n";
  if (!demo_pages.empty()) {
    p += "\nThe following pages were captured while a user browsed the website:\n";
    for (const auto& d : demo_pages) p += d + "\n";
    p += "Ground your tasks in what these pages show.\n";
  }
  p += "\nRules:\n";
  p += "- Write " + std::to_string(n) + " tasks in the same JSON shape as the example above, "
       "with web_name \"" + site_id + "\" and ids of the form \"" + site_id + "--<number>\".\n";
  p += "- Vary the wording and the difficulty; each task should need between 3 and 7 steps.\n";
  p += "- Every task must be checkable from the final pages and the agent's answer alone, must not "
       "depend on the user's time or location, and must not require signing in.\n";
  p += "- Think first, then write a line containing only 'Output:' followed by one JSON object per "
       "line and nothing else.\n";
  return p;
}

std::string agent_system_prompt(bool google_enabled) {
  std::string p =
      "You operate a web browser to complete a task. Each turn you receive an observation: the page "
      "title, the visible text, and the interactive elements, each tagged with a numerical label.\n"
      "Reply with exactly one action per turn using one of these formats:\n"
      "- Click [Numerical_Label]\n"
      "- Type [Numerical_Label]; [Content]\n"
      "- Scroll [Numerical_Label or WINDOW]; [up or down]\n"
      "- Wait\n"
      "- GoBack\n";
  if (google_enabled) p += "- Google\n";
  p += "- ANSWER; [content]\n"
       "Typing replaces the textbox content and presses enter automatically. Use ANSWER only when "
       "the task is complete, and keep the answer short (e.g. a number, not a sentence). If the "
       "information cannot be found, answer N/A.\n"
       "Reply format:\n"
       "Thought: {brief reasoning}\n"
       "Action: {one action}\n";
  return p;
}

std::string agent_step_message(const std::string& instruction, const web::Observation& obs,
                               const std::vector<std::string>& previous_actions) {
  std::string m = "Task: " + instruction + "\n";
  if (!previous_actions.empty()) {
    m += "Previous actions:\n";
    for (const auto& a : previous_actions) m += "- " + a + "\n";
  }
  m += "Observation:\n" + web::render_observation_text(obs);
  return m;
}

std::string evaluator_system_prompt() {
  return "You judge whether a web navigation agent completed a task. You receive the task "
         "instruction, the agent's final answer, and the last pages it saw (at most three).\n"
         "Only trust what the pages show. An answer that the pages do not support, or that does "
         "only part of the task, is a failure.\n"
         "Explain your reasoning briefly, then finish with a single verdict: SUCCESS or NOT "
         "SUCCESS.";
}

std::string evaluator_user_message(const std::string& instruction, const std::string& answer,
                                   const std::vector<web::Observation>& final_observations) {
  std::string m = "Task: " + instruction + "\n";
  m += "Agent answer: " + (answer.empty() ? std::string("(none)") : answer) + "\n";
  m += "Final pages:\n";
  for (const auto& obs : final_observations) m += web::render_observation_text(obs);
  return m;
}

std::string step_judge_prompt(const Trajectory& trajectory) {
  std::string m = "Task: " + trajectory.task.instruction + "\n"
                  "For every step below decide whether the action moved the agent toward "
                  "completing the task. Reply with one line per step, formatted as "
                  "'Step <number>: CORRECT' or 'Step <number>: INCORRECT', numbering from 1.\n";
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    const auto& s = trajectory.steps[i];
    m += "Step " + std::to_string(i + 1) + ":\n" + web::render_observation_text(s.observation) +
         "Action: " + actions::format_action(s.record.action) + "\n";
  }
  return m;
}

std::string verifier_prompt(const std::string& instruction, const std::string& site_name) {
  return "Write a verification function for a web task on \"" + site_name +
         "\". Use exactly one predicate from this language:\n"
         "  page_is:<page_id>\n"
         "  answer_equals:<text>\n"
         "  answer_normalized:<text>\n"
         "  session:<var> contains <value>\n"
         "  session:<var> equals <value>\n"
         "  session:<var> empty\n"
         "Task: " + instruction + "\n"
         "Reply with a line 'Verifier: <program>'.";
}

}  // namespace pae::prompts
