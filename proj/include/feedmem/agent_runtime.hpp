#pragma once

// Executes one task attempt under a chosen condition:
//   zero_shot        one tool-enabled turn loop, no feedback history
//   self_critique    fixed draft -> critique -> revise pipeline (3 calls)
//   memory_feedback  tool loop driven by the memory system prompt, plus
//                    feedback ingestion that persists distilled notes
//
// The memory tools are attached in zero_shot and memory_feedback; the
// self-critique pipeline runs without tools. The grading rubric is private:
// it reaches the agent context only inside the self-critique prompts.

#include <string>
#include <vector>

#include "feedmem/evaluator.hpp"
#include "feedmem/tool_protocol.hpp"

namespace feedmem::agent {

using bench::Rubric;
using bench::Scenario;
using eval::Verdict;

enum class Condition { zero_shot, self_critique, memory_feedback };

inline const char* condition_name(Condition c) {
  switch (c) {
    case Condition::zero_shot: return "zero_shot";
    case Condition::self_critique: return "self_critique";
    case Condition::memory_feedback: return "memory_feedback";
  }
  return "zero_shot";
}

inline std::optional<Condition> parse_condition(std::string_view s) {
  if (s == "zero_shot") return Condition::zero_shot;
  if (s == "self_critique") return Condition::self_critique;
  if (s == "memory_feedback") return Condition::memory_feedback;
  return std::nullopt;
}

enum class PhaseKind { retrieval, generation, feedback_ingestion, distillation };

inline const char* phase_name(PhaseKind p) {
  switch (p) {
    case PhaseKind::retrieval: return "retrieval";
    case PhaseKind::generation: return "generation";
    case PhaseKind::feedback_ingestion: return "feedback_ingestion";
    case PhaseKind::distillation: return "distillation";
  }
  return "generation";
}

struct PhaseSpan {
  PhaseKind kind;
  std::size_t first_message;  // inclusive indexes into Transcript::messages
  std::size_t last_message;
};

struct Transcript {
  std::vector<ChatMessage> messages;
  UsageStats usage_total;
  std::vector<PhaseSpan> phases;

  bool contains_text(std::string_view needle) const {
    for (const auto& m : messages)
      if (m.text.find(needle) != std::string::npos) return true;
    return false;
  }

  Json to_json_lines() const {
    Json lines = Json::array();
    for (const auto& m : messages) lines.push_back(message_to_json(m));
    return lines;
  }
};

struct AgentConfig {
  std::string system_prompt;           // empty -> default_system_prompt()
  int max_tool_iterations = 8;         // per tool loop
  double temperature = 0.7;
  int max_output_tokens = 4096;
  BackendConfig backend;
};

// The default system prompt that instantiates the memory protocol.
inline const std::string& default_system_prompt() {
  static const std::string prompt =
      "You are an expert writer that can plan before generating the final text. "
      "When writing a text for a task, always display the final version directly "
      "to the user.\n\n"
      "Before generating a text for a user task, check your ./memories/ directory "
      "for relevant notes from previous related tasks, and use that knowledge if "
      "the new task is related.\n\n"
      "When receiving feedback from the user about a text, take notes in your "
      "./memories/ about what to improve for next time.\n\n"
      "Use general names for the filename, since we are aiming for generalization "
      "and reusability (e.g., \"research_notes.txt\" instead of "
      "\"research_notes_for_task_123.txt\"). You can also update existing memory "
      "files with new knowledge, but remember the aim is generalization, not "
      "focusing on concrete examples.\n\n"
      "Be organized and methodical in your approach to use the memory effectively "
      "to achieve better feedback from the user over time.";
  return prompt;
}

// Feedback delivery template (version 1). The critique and the raw score on
// its native scale are presented as an ordinary user turn.
inline const char* kFeedbackTemplateV1 =
    "You received the following feedback from the user about your last "
    "response:\n\n{critique}\n\nScore: {score}/{scale_max}";

inline std::string feedback_message(const Verdict& verdict, bench::Scale scale) {
  std::string text = kFeedbackTemplateV1;
  text = replace_first(std::move(text), "{critique}", verdict.critique);
  text = replace_first(std::move(text), "{score}", fmt_double(verdict.raw_score));
  text = replace_first(std::move(text), "{scale_max}", fmt_double(eval::scale_max(scale)));
  return text;
}

inline std::string self_critique_prompt(const Rubric& rubric, const std::string& draft) {
  return "You wrote the following draft for a task.\n\nDraft:\n" + draft +
         "\n\nCritique the draft against the specific criteria of this rubric:\n\n" +
         rubric.full_text +
         "\n\nList the concrete shortcomings that keep the draft from the top "
         "performance level on each criterion.";
}

inline std::string revision_prompt(const std::string& draft, const std::string& critique) {
  return "Here is your draft and a critique of it.\n\nDraft:\n" + draft +
         "\n\nCritique:\n" + critique +
         "\n\nRewrite the draft into a final version that addresses every point "
         "in the critique. Output only the final version.";
}

// ---------------------------------------------------------------------------

struct TaskOutcome {
  std::string final_text;
  Transcript transcript;
  int generation_calls = 0;
  int tool_iterations = 0;  // assistant turns that carried tool calls
  bool retrieved = false;   // at least one successful read_file
};

struct FeedbackOutcome {
  int generation_calls = 0;
  UsageStats usage;
  int files_touched = 0;  // successful write_file/edit_file dispatches
  int tool_iterations = 0;
};

namespace detail {

struct LoopStats {
  int generation_calls = 0;
  int tool_iterations = 0;
  bool retrieved = false;
  int files_touched = 0;
};

// Shared tool loop: generate until a non-tool assistant turn or the
// iteration bound trips. Tool results always come back as observations;
// only the model ends the loop.
inline Result<std::string> run_tool_loop(Transcript& transcript,
                                         const memory::MemoryRoot& root,
                                         const AgentConfig& cfg, Backend& backend,
                                         LoopStats& stats) {
  GenerationRequest request;
  request.tools = tools::memory_tool_specs();
  request.temperature = cfg.temperature;
  request.max_output_tokens = cfg.max_output_tokens;

  while (true) {
    request.messages = transcript.messages;
    auto response = backend.generate(request);
    if (!response.ok()) return response.error();

    transcript.usage_total += response.value().usage;
    transcript.messages.push_back(response.value().message);
    ++stats.generation_calls;

    const auto& calls = response.value().message.tool_calls;
    if (calls.empty()) return response.value().message.text;

    ++stats.tool_iterations;
    if (stats.tool_iterations > cfg.max_tool_iterations)
      return make_error(Errc::tool_loop_exceeded,
                        "tool loop exceeded " + std::to_string(cfg.max_tool_iterations) +
                            " iterations");
    for (const auto& call : calls) {
      auto result = tools::dispatch(call, root);
      if (result.ok && call.tool_name == "read_file") stats.retrieved = true;
      if (result.ok && (call.tool_name == "write_file" || call.tool_name == "edit_file"))
        ++stats.files_touched;
      transcript.messages.push_back(tools::render_result(result));
    }
  }
}

inline Result<GenerationResponse> single_call(Transcript& transcript,
                                              std::vector<ChatMessage> messages,
                                              const AgentConfig& cfg, Backend& backend) {
  GenerationRequest request;
  request.messages = messages;
  request.temperature = cfg.temperature;
  request.max_output_tokens = cfg.max_output_tokens;
  auto response = backend.generate(request);
  if (!response.ok()) return response;
  for (auto& m : messages) transcript.messages.push_back(std::move(m));
  transcript.messages.push_back(response.value().message);
  transcript.usage_total += response.value().usage;
  return response;
}

}  // namespace detail

inline Result<TaskOutcome> run_task(const Scenario& task, const Rubric& rubric,
                                    Condition condition, const memory::MemoryRoot& root,
                                    const AgentConfig& cfg, Backend& backend) {
  const std::string& system_prompt =
      cfg.system_prompt.empty() ? default_system_prompt() : cfg.system_prompt;
  TaskOutcome outcome;
  Transcript& t = outcome.transcript;

  if (condition == Condition::self_critique) {
    // Fixed three-pass pipeline: draft, critique against the rubric text,
    // revision. Exactly three generation calls, no tools.
    auto draft = detail::single_call(
        t, {ChatMessage::make_system(system_prompt), ChatMessage::make_user(task.prompt)},
        cfg, backend);
    if (!draft.ok()) return draft.error();
    const std::string draft_text = draft.value().message.text;

    auto critique = detail::single_call(
        t, {ChatMessage::make_user(self_critique_prompt(rubric, draft_text))}, cfg, backend);
    if (!critique.ok()) return critique.error();

    auto revision = detail::single_call(
        t, {ChatMessage::make_user(revision_prompt(draft_text, critique.value().message.text))},
        cfg, backend);
    if (!revision.ok()) return revision.error();

    outcome.final_text = revision.value().message.text;
    outcome.generation_calls = 3;
    t.phases.push_back({PhaseKind::generation, 0, t.messages.size() - 1});
    return outcome;
  }

  // zero_shot and memory_feedback both run the tool-enabled loop; the
  // difference is entirely in what the harness threads through `root`
  // and whether feedback ever follows.
  t.messages.push_back(ChatMessage::make_system(system_prompt));
  t.messages.push_back(ChatMessage::make_user(task.prompt));
  std::size_t loop_start = t.messages.size();

  detail::LoopStats stats;
  auto final_text = detail::run_tool_loop(t, root, cfg, backend, stats);
  if (!final_text.ok()) return final_text.error();

  outcome.final_text = final_text.take();
  outcome.generation_calls = stats.generation_calls;
  outcome.tool_iterations = stats.tool_iterations;
  outcome.retrieved = stats.retrieved;
  if (stats.tool_iterations > 0)
    t.phases.push_back({PhaseKind::retrieval, loop_start, t.messages.size() - 2});
  t.phases.push_back({PhaseKind::generation, t.messages.size() - 1, t.messages.size() - 1});
  return outcome;
}

// Appends the judge's critique as a user turn and lets the agent distill it
// into memory through the tool loop. Only meaningful under memory_feedback.
inline Result<FeedbackOutcome> ingest_feedback(const Verdict& verdict, bench::Scale scale,
                                               Transcript& transcript,
                                               const memory::MemoryRoot& root,
                                               const AgentConfig& cfg, Backend& backend) {
  FeedbackOutcome outcome;
  transcript.messages.push_back(ChatMessage::make_user(feedback_message(verdict, scale)));
  std::size_t feedback_index = transcript.messages.size() - 1;
  transcript.phases.push_back({PhaseKind::feedback_ingestion, feedback_index, feedback_index});

  UsageStats before = transcript.usage_total;
  detail::LoopStats stats;
  auto ack = detail::run_tool_loop(transcript, root, cfg, backend, stats);
  if (!ack.ok()) return ack.error();

  outcome.generation_calls = stats.generation_calls;
  outcome.tool_iterations = stats.tool_iterations;
  outcome.files_touched = stats.files_touched;
  outcome.usage = transcript.usage_total;
  outcome.usage.input_tokens -= before.input_tokens;
  outcome.usage.output_tokens -= before.output_tokens;
  outcome.usage.calls -= before.calls;
  if (transcript.messages.size() - 1 > feedback_index)
    transcript.phases.push_back(
        {PhaseKind::distillation, feedback_index + 1, transcript.messages.size() - 1});
  return outcome;
}

}  // namespace feedmem::agent
