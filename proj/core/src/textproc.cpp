#include "compre/textproc.hpp"

#include <cctype>
#include <stdexcept>

#include "compre/random.hpp"

namespace compre {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) != 0;
}

void split_chunk(std::string_view chunk, std::vector<std::string>& out) {
  std::size_t b = 0;
  std::size_t e = chunk.size();
  while (b < e && is_punct(chunk[b])) out.emplace_back(1, chunk[b++]);
  std::size_t tail = e;
  while (tail > b && is_punct(chunk[tail - 1])) --tail;
  if (tail > b) out.emplace_back(chunk.substr(b, tail - b));
  for (std::size_t i = tail; i < e; ++i) out.emplace_back(1, chunk[i]);
}

}  // namespace

TokenSeq tokenize(std::string_view text, SourceKind kind) {
  TokenSeq seq{{}, kind};
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) split_chunk(text.substr(start, i - start), seq.tokens);
  }
  return seq;
}

std::string join_tokens(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += seq.tokens[i];
  }
  return out;
}

std::string_view to_string(ExtractMode mode) noexcept {
  switch (mode) {
    case ExtractMode::beginning: return "beginning";
    case ExtractMode::end: return "end";
    case ExtractMode::random_window: return "random_window";
  }
  return "?";
}

ExtractMode parse_extract_mode(std::string_view text) {
  if (text == "beginning") return ExtractMode::beginning;
  if (text == "end") return ExtractMode::end;
  if (text == "random_window" || text == "random") return ExtractMode::random_window;
  throw std::invalid_argument("unknown extract mode '" + std::string(text) + "'");
}

std::size_t retained_count(std::size_t length, int tau) {
  if (tau < 0 || tau > 100) throw std::invalid_argument("tau must be in [0, 100], got " + std::to_string(tau));
  return (static_cast<std::size_t>(tau) * length + 50) / 100;
}

TokenWindow extract_window(std::size_t length, const ExtractSpec& spec, std::string_view item_id) {
  const std::size_t k = retained_count(length, spec.tau);
  switch (spec.mode) {
    case ExtractMode::beginning: return {0, k};
    case ExtractMode::end: return {length - k, length};
    case ExtractMode::random_window: {
      auto engine = keyed_engine(spec.seed, item_id);
      const auto start = static_cast<std::size_t>(uniform_below(engine, length - k + 1));
      return {start, start + k};
    }
  }
  return {0, k};
}

TokenSeq extract_context(const TokenSeq& context, const ExtractSpec& spec, std::string_view item_id) {
  if (context.source_kind != SourceKind::context) {
    throw std::invalid_argument("extract_context: token sequence is not a context");
  }
  const auto w = extract_window(context.size(), spec, item_id);
  TokenSeq out{{}, SourceKind::context};
  out.tokens.assign(context.tokens.begin() + static_cast<std::ptrdiff_t>(w.begin),
                    context.tokens.begin() + static_cast<std::ptrdiff_t>(w.end));
  return out;
}

AssembledInput assemble_tokens(const std::optional<TokenSeq>& context, const TokenSeq& question,
                               const TokenSeq& option, int max_len) {
  const std::size_t fixed = question.size() + option.size() + 3;
  if (max_len < 0 || fixed > static_cast<std::size_t>(max_len)) {
    throw std::invalid_argument("question and option need " + std::to_string(fixed) +
                                " tokens, exceeding max_len " + std::to_string(max_len));
  }
  const std::size_t context_budget = static_cast<std::size_t>(max_len) - fixed;
  const std::size_t context_len = context ? std::min(context->size(), context_budget) : 0;

  AssembledInput in;
  in.tokens.reserve(fixed + context_len);
  auto push = [&](std::string_view tok, Segment seg) {
    in.tokens.emplace_back(tok);
    in.segment_map.push_back(seg);
  };
  push(kClsToken, Segment::marker);
  if (context_len > 0) {
    for (std::size_t i = 0; i < context_len; ++i) push(context->tokens[i], Segment::context);
    push(kSepToken, Segment::marker);
  }
  for (const auto& t : question.tokens) push(t, Segment::question);
  for (const auto& t : option.tokens) push(t, Segment::option);
  push(kSepToken, Segment::marker);
  return in;
}

AssembledInput assemble_input(const McqItem& item, int option_index, const std::optional<TokenSeq>& context,
                              int max_len) {
  if (option_index < 0 || option_index >= item.option_count()) {
    throw std::invalid_argument("option_index " + std::to_string(option_index) + " out of range for item '" +
                                item.id + "'");
  }
  return assemble_tokens(context, tokenize(item.question, SourceKind::question),
                         tokenize(item.options[static_cast<std::size_t>(option_index)], SourceKind::option),
                         max_len);
}

}  // namespace compre
