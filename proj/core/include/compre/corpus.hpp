#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace compre {

enum class ContextKind { passage, dialogue, speech_manual, speech_asr };

std::string_view to_string(ContextKind kind) noexcept;
ContextKind parse_context_kind(std::string_view text);

// One multiple-choice question. Option order is significant: predictions are
// indices into `options`.
struct McqItem {
  std::string id;
  std::string context;
  ContextKind context_kind = ContextKind::passage;
  std::string question;
  std::vector<std::string> options;
  int answer_index = 0;
  std::map<std::string, std::string> meta;

  int option_count() const noexcept { return static_cast<int>(options.size()); }
  bool operator==(const McqItem&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<McqItem> items;

  bool operator==(const Corpus&) const = default;
};

struct Violation {
  std::string item_id;
  std::string rule;
  std::string detail;
};

// Checks every item invariant plus id uniqueness. Empty result iff valid.
std::vector<Violation> validate(const Corpus& corpus);
std::vector<Violation> validate_item(const McqItem& item);

// Throws DataError listing the first few violations (or an empty corpus).
void require_valid(const Corpus& corpus);

enum class CorpusFormat { canonical_jsonl, race_dir, dream_json, debater_csv };

CorpusFormat parse_corpus_format(std::string_view tag);
std::string_view to_string(CorpusFormat format) noexcept;

struct LoadOptions {
  // Prefix each dialogue turn with "<speaker>: " when building DREAM contexts.
  bool keep_speakers = true;
};

// Loads and validates a corpus. Items keep file order; the corpus is named
// after the file (or directory) stem.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const LoadOptions& options = {});

struct Turn {
  std::string speaker;
  std::string utterance;
};

// Joins turns in order as "<speaker>: <utterance>", one per line.
std::string build_dialogue_context(std::span<const Turn> turns, bool keep_speakers = true);

// Splits a DREAM-style "M: utterance" line at the first ": ".
Turn parse_turn(std::string_view line);

enum class Stance { pro, con };

Stance parse_stance(std::string_view text);

inline constexpr std::string_view kDebateQuestionPrefix =
    "Is the speaker arguing for or against the topic: ";

// Reformulates a debate speech as a binary listening-comprehension item with
// options ["for", "against"].
McqItem build_debate_item(std::string id, std::string speech, std::string_view topic,
                          Stance stance, ContextKind kind);

// Canonical JSONL interchange.
nlohmann::ordered_json item_to_json(const McqItem& item);
McqItem item_from_json(const nlohmann::json& record);
void write_canonical_jsonl(const Corpus& corpus, std::ostream& out);
void save_canonical_jsonl(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_canonical_jsonl(std::istream& in, std::string name, std::string_view source = "<stream>");

}  // namespace compre
