#pragma once

#include <cstdint>
#include <string_view>

#include "compre/corpus.hpp"
#include "json.hpp"

namespace compre {

enum class PositionProfile { front, uniform, end };

std::string_view to_string(PositionProfile profile) noexcept;
PositionProfile parse_position_profile(std::string_view text);

// Synthetic corpus with a planted answer keyword per item.
struct SynthSpec {
  int size = 1000;
  int n_options = 4;
  double leak_rate = 0.0;  // probability the question also contains the keyword
  PositionProfile position_profile = PositionProfile::uniform;
  int context_len = 30;
  int vocab_size = 2000;
  int question_len = 4;  // filler tokens per question
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SynthSpec&) const = default;
};

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

// Vocabulary token for index i ("w0", "w1", ...).
std::string synth_token(int index);

// Each item gets a unique answer keyword: the correct option, planted once in
// the context (front = first 20% of tokens, end = last 20%, uniform =
// anywhere) and, with probability leak_rate, once in the question.
// Distractors are keywords absent from the context and question. Filler is
// drawn uniformly from the rest of the vocabulary. meta records "keyword",
// "keyword_position" and "leaked".
Corpus generate(const SynthSpec& spec);

// Accuracy of an ideal keyword matcher that sees only question and options.
double oracle_context_free_accuracy(const SynthSpec& spec);

}  // namespace compre
