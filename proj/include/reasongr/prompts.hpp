#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reasongr/corpus.hpp"
#include "reasongr/types.hpp"

namespace reasongr::prompts {

inline constexpr std::array<std::string_view, 5> kTaskTemplates = {
    "Answer the query with a document ID.",
    "Generate the document ID that answers the question.",
    "Based on the question, predict the document ID.",
    "Retrieve a document ID that fits the query.",
    "Using the question, find the document ID.",
};

inline constexpr std::array<std::string_view, 5> kCotInstructions = {
    "Use step-by-step reasoning.",
    "You need to explain your answer.",
    "Think this through carefully.",
    "Let's think step-by-step.",
    "Explain your reasoning before answering.",
};

// Marker between a reasoning trace and the docid in CoT targets.
inline constexpr std::string_view kTraceSeparator = " => ";

inline constexpr std::size_t kDefaultShots = 2;

enum class PromptMode { plain, fewshot, cot, fewshot_cot };

std::string_view to_string(PromptMode mode);
PromptMode parse_mode(std::string_view name);
bool uses_cot(PromptMode mode);
bool uses_fewshot(PromptMode mode);

struct FewShotExample {
  std::string query;
  std::string surface;
};

struct PromptSample {
  std::string input_text;
  std::string target_text;
  PromptMode mode = PromptMode::plain;
  int template_id = 0;
  std::optional<int> cot_id;
};

// Pins the template and/or CoT choice. The rng is still advanced identically,
// so forcing one choice never shifts later draws.
struct ForcedChoice {
  std::optional<int> template_id;
  std::optional<int> cot_id;
};

// Draws (template, cot) uniformly from the 5x5 grid with `rng` and renders
//   template " " [cot " "] [examples] "Query: " query " Document ID:"
// where each few-shot example is "Query: <q> Document ID: <surface>\n".
// target_text is left empty; see format_target().
PromptSample compose_prompt(Rng& rng, std::string_view query, PromptMode mode,
                            std::span<const FewShotExample> fewshot_examples,
                            ForcedChoice forced = {});

// All 25 (template_id, cot_id) pairs in lexicographic order.
std::vector<std::pair<int, int>> enumerate_combinations();

// Non-CoT: the docid surface. CoT: steps joined by "; ", then " => ", then the
// surface. Throws ConfigError for a CoT mode with an empty trace.
std::string format_target(const corpus::DocId& docid, std::span<const std::string> trace,
                          PromptMode mode);

// Docid surface of a formatted target: the text after the final " => ", or the
// whole string when there is no separator.
std::string extract_surface(std::string_view target);

// Two-step trace: key phrase from the query, then "company <c>, year <y>".
std::vector<std::string> synthesize_trace(std::string_view query, const corpus::DocId& docid);

}  // namespace reasongr::prompts
