#include "reasongr/prompts.hpp"

#include "reasongr/error.hpp"
#include "reasongr/text.hpp"

namespace reasongr::prompts {

std::string_view to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::plain: return "plain";
    case PromptMode::fewshot: return "fewshot";
    case PromptMode::cot: return "cot";
    case PromptMode::fewshot_cot: return "fewshot_cot";
  }
  return "plain";
}

PromptMode parse_mode(std::string_view name) {
  if (name == "plain") return PromptMode::plain;
  if (name == "fewshot") return PromptMode::fewshot;
  if (name == "cot") return PromptMode::cot;
  if (name == "fewshot_cot") return PromptMode::fewshot_cot;
  throw ConfigError("unknown prompt mode '" + std::string(name) + "'");
}

bool uses_cot(PromptMode mode) {
  return mode == PromptMode::cot || mode == PromptMode::fewshot_cot;
}

bool uses_fewshot(PromptMode mode) {
  return mode == PromptMode::fewshot || mode == PromptMode::fewshot_cot;
}

PromptSample compose_prompt(Rng& rng, std::string_view query, PromptMode mode,
                            std::span<const FewShotExample> fewshot_examples,
                            ForcedChoice forced) {
  if (uses_fewshot(mode) && fewshot_examples.empty()) {
    throw ConfigError("few-shot prompt mode requires at least one example");
  }
  std::uniform_int_distribution<int> pick(0, 4);
  int template_id = pick(rng);
  int cot_id = pick(rng);
  if (forced.template_id) template_id = *forced.template_id;
  if (forced.cot_id) cot_id = *forced.cot_id;
  if (template_id < 0 || template_id > 4 || cot_id < 0 || cot_id > 4) {
    throw ConfigError("template and CoT ids must lie in [0, 4]");
  }

  PromptSample sample;
  sample.mode = mode;
  sample.template_id = template_id;
  std::string& in = sample.input_text;
  in = kTaskTemplates[template_id];
  in += ' ';
  if (uses_cot(mode)) {
    sample.cot_id = cot_id;
    in += kCotInstructions[cot_id];
    in += ' ';
  }
  if (uses_fewshot(mode)) {
    for (const auto& ex : fewshot_examples) {
      in += "Query: " + ex.query + " Document ID: " + ex.surface + "\n";
    }
  }
  in += "Query: ";
  in += query;
  in += " Document ID:";
  return sample;
}

std::vector<std::pair<int, int>> enumerate_combinations() {
  std::vector<std::pair<int, int>> out;
  for (int t = 0; t < static_cast<int>(kTaskTemplates.size()); ++t) {
    for (int c = 0; c < static_cast<int>(kCotInstructions.size()); ++c) out.emplace_back(t, c);
  }
  return out;
}

std::string format_target(const corpus::DocId& docid, std::span<const std::string> trace,
                          PromptMode mode) {
  if (!uses_cot(mode)) return docid.surface();
  if (trace.empty()) throw ConfigError("CoT targets require a nonempty reasoning trace");
  std::string out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i > 0) out += "; ";
    out += trace[i];
  }
  out += kTraceSeparator;
  out += docid.surface();
  return out;
}

std::string extract_surface(std::string_view target) {
  auto pos = target.rfind(kTraceSeparator);
  if (pos == std::string_view::npos) return std::string(target);
  return std::string(target.substr(pos + kTraceSeparator.size()));
}

std::vector<std::string> synthesize_trace(std::string_view query, const corpus::DocId& docid) {
  const std::string& company = docid.components.at(0);
  const std::string& year = docid.components.at(1);
  std::vector<std::string> phrase;
  for (auto& tok : text::word_tokens(query)) {
    if (phrase.size() == 3) break;
    if (text::is_stopword(tok) || tok == company || tok == year) continue;
    phrase.push_back(std::move(tok));
  }
  std::string first = phrase.empty() ? "find the relevant report" : "find " + text::join(phrase, " ");
  return {first, "company " + company + ", year " + year};
}

}  // namespace reasongr::prompts
