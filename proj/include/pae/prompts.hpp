#pragma once

// Prompt text for the remote-model adapters. These strings are opaque to the
// rest of the system; only the reply formats they request are parsed.

#include <string>
#include <vector>

#include "pae/trajectory.hpp"
#include "pae/webworld.hpp"

namespace pae::prompts {

/// Task proposer. Replies are expected to end with "Output:" followed by
/// JSONL lines carrying web_name, id and ques.
std::string proposer_prompt(const std::string& site_id, const std::string& site_name,
                            const std::string& descriptor,
                            const std::vector<std::string>& demo_pages, int n);

/// Agent system prompt; the reply must be a "Thought:" line and an
/// "Action:" line in the action grammar.
std::string agent_system_prompt(bool google_enabled);

/// Per-step user message for the agent.
std::string agent_step_message(const std::string& instruction, const web::Observation& obs,
                               const std::vector<std::string>& previous_actions);

/// Outcome evaluator. The reply must end with SUCCESS or NOT SUCCESS.
std::string evaluator_system_prompt();
std::string evaluator_user_message(const std::string& instruction, const std::string& answer,
                                   const std::vector<web::Observation>& final_observations);

/// Step evaluator. One "Step <i>: CORRECT|INCORRECT" line per step.
std::string step_judge_prompt(const Trajectory& trajectory);

/// Verification-function generator. Reply must contain a line
/// "Verifier: <program>" in the verifier mini-language.
std::string verifier_prompt(const std::string& instruction, const std::string& site_name);

}  // namespace pae::prompts
