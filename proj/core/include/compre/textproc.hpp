#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "compre/corpus.hpp"

namespace compre {

enum class SourceKind { context, question, option };

struct TokenSeq {
  std::vector<std::string> tokens;
  SourceKind source_kind = SourceKind::context;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  bool operator==(const TokenSeq&) const = default;
};

// Whitespace split, then leading/trailing ASCII punctuation detached one
// character per token. Case is preserved; non-ASCII bytes are word characters.
TokenSeq tokenize(std::string_view text, SourceKind kind = SourceKind::context);

std::string join_tokens(const TokenSeq& seq);

enum class ExtractMode { beginning, end, random_window };

std::string_view to_string(ExtractMode mode) noexcept;
ExtractMode parse_extract_mode(std::string_view text);

struct ExtractSpec {
  int tau = 100;  // percent of context tokens retained, 0..100
  ExtractMode mode = ExtractMode::beginning;
  std::uint64_t seed = 0;  // random_window only

  bool operator==(const ExtractSpec&) const = default;
};

// round(tau * length / 100), halves rounded up.
std::size_t retained_count(std::size_t length, int tau);

struct TokenWindow {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// The contiguous [begin, end) window an extract keeps. random_window draws the
// start from a generator keyed on (spec.seed, item_id).
TokenWindow extract_window(std::size_t length, const ExtractSpec& spec, std::string_view item_id);

TokenSeq extract_context(const TokenSeq& context, const ExtractSpec& spec, std::string_view item_id);

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr int kDefaultMaxLen = 512;

enum class Segment : std::uint8_t { marker, context, question, option };

// One option's model input:
//   standard      [CLS] <C> [SEP] <Q> <O_i> [SEP]
//   context-free  [CLS] <Q> <O_i> [SEP]
// An empty context yields the context-free layout.
struct AssembledInput {
  std::vector<std::string> tokens;
  std::vector<Segment> segment_map;

  bool operator==(const AssembledInput&) const = default;
};

// Context tokens are dropped from the end until the input fits max_len.
// Throws std::invalid_argument when question + option + 3 markers exceed it.
AssembledInput assemble_tokens(const std::optional<TokenSeq>& context, const TokenSeq& question,
                               const TokenSeq& option, int max_len = kDefaultMaxLen);

AssembledInput assemble_input(const McqItem& item, int option_index,
                              const std::optional<TokenSeq>& context, int max_len = kDefaultMaxLen);

}  // namespace compre
