#include "compre/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "compre/error.hpp"

namespace compre {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kContextKindNames = {"passage", "dialogue",
                                                               "speech_manual", "speech_asr"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

[[noreturn]] void field_error(std::string_view field, std::string_view what) {
  throw DataError("field '" + std::string(field) + "': " + std::string(what));
}

const json& required(const json& record, std::string_view field) {
  const auto it = record.find(field);
  if (it == record.end()) field_error(field, "missing");
  return *it;
}

std::string required_string(const json& record, std::string_view field) {
  const auto& v = required(record, field);
  if (!v.is_string()) field_error(field, "expected a string");
  return v.get<std::string>();
}

// Wraps an adapter-level failure with the file and record position.
template <typename F>
auto at_record(const fs::path& path, std::size_t index, F&& fn) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError(path.string() + ": record " + std::to_string(index) + ": " + e.what());
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": record " + std::to_string(index) + ": " + e.what());
  }
}

void check_item(const McqItem& item) {
  const auto violations = validate_item(item);
  if (!violations.empty()) {
    const auto& v = violations.front();
    field_error(v.rule, v.detail + " (item '" + item.id + "')");
  }
}

void check_unique_ids(const Corpus& corpus, const fs::path& path) {
  std::unordered_map<std::string_view, std::size_t> seen;
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    const auto [it, inserted] = seen.emplace(corpus.items[i].id, i);
    if (!inserted) {
      throw DataError(path.string() + ": record " + std::to_string(i) + ": field 'id': duplicate of record " +
                      std::to_string(it->second) + " ('" + corpus.items[i].id + "')");
    }
  }
}

// ---- canonical_jsonl -------------------------------------------------------

Corpus load_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  return read_canonical_jsonl(in, path.stem().string(), path.string());
}

// ---- race_dir --------------------------------------------------------------
// One JSON file per article: {article, questions[], options[][], answers[], id}.

Corpus load_race_dir(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError(root.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".txt" || ext == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Corpus corpus{root.filename().empty() ? root.parent_path().filename().string()
                                        : root.filename().string(),
                {}};
  for (const auto& file : files) {
    const auto rel = fs::relative(file, root);
    std::string level;
    std::string split;
    for (const auto& part : rel.parent_path()) {
      const auto p = lower(part.string());
      if (p == "middle" || p == "high" || p == "college") level = p;
      if (p == "train" || p == "dev" || p == "test") split = p;
    }
    const json doc = at_record(file, 0, [&] { return json::parse(read_file(file)); });
    const auto& questions = doc.value("questions", json::array());
    for (std::size_t q = 0; q < questions.size(); ++q) {
      corpus.items.push_back(at_record(file, q, [&] {
        McqItem item;
        const auto base = doc.contains("id") ? doc["id"].get<std::string>() : rel.generic_string();
        item.id = base + "-" + std::to_string(q);
        item.context = required_string(doc, "article");
        item.context_kind = ContextKind::passage;
        if (!questions[q].is_string()) field_error("questions", "expected strings");
        item.question = questions[q].get<std::string>();
        const auto& options = required(doc, "options");
        if (!options.is_array() || q >= options.size() || !options[q].is_array())
          field_error("options", "no option list for question");
        for (const auto& o : options[q]) {
          if (!o.is_string()) field_error("options", "expected strings");
          item.options.push_back(o.get<std::string>());
        }
        const auto& answers = required(doc, "answers");
        if (!answers.is_array() || q >= answers.size() || !answers[q].is_string())
          field_error("answers", "no answer letter for question");
        const auto letter = trim(answers[q].get<std::string>());
        if (letter.size() != 1 || !std::isupper(static_cast<unsigned char>(letter[0])))
          field_error("answers", "expected a letter A.., got '" + letter + "'");
        item.answer_index = letter[0] - 'A';
        item.meta["dataset"] = "race";
        if (!level.empty()) item.meta["level"] = level;
        if (!split.empty()) item.meta["split"] = split;
        check_item(item);
        return item;
      }));
    }
  }
  return corpus;
}

// ---- dream_json ------------------------------------------------------------
// [[turns[], questions[{question, choice[], answer}], id], ...]

Corpus load_dream(const fs::path& path, const LoadOptions& options) {
  const json doc = at_record(path, 0, [&] { return json::parse(read_file(path)); });
  if (!doc.is_array()) throw DataError(path.string() + ": expected a top-level array");
  Corpus corpus{path.stem().string(), {}};
  std::size_t record = 0;
  for (std::size_t g = 0; g < doc.size(); ++g) {
    const auto& group = doc[g];
    const auto [context, dialogue_id] = at_record(path, record, [&] {
      if (!group.is_array() || group.size() < 2 || !group[0].is_array() || !group[1].is_array())
        field_error("group", "expected [turns, questions, id]");
      std::vector<Turn> turns;
      for (const auto& line : group[0]) {
        if (!line.is_string()) field_error("turns", "expected strings");
        turns.push_back(parse_turn(line.get<std::string>()));
      }
      if (turns.empty()) field_error("turns", "empty dialogue");
      std::string id = group.size() > 2 && group[2].is_string() ? group[2].get<std::string>()
                                                                 : "dialogue-" + std::to_string(g);
      return std::pair{build_dialogue_context(turns, options.keep_speakers), std::move(id)};
    });
    const auto& questions = group[1];
    for (std::size_t q = 0; q < questions.size(); ++q, ++record) {
      corpus.items.push_back(at_record(path, record, [&] {
        const auto& entry = questions[q];
        if (!entry.is_object()) field_error("question", "expected an object");
        McqItem item;
        item.id = dialogue_id + "-" + std::to_string(q);
        item.context = context;
        item.context_kind = ContextKind::dialogue;
        item.question = required_string(entry, "question");
        const auto& choices = required(entry, "choice");
        if (!choices.is_array()) field_error("choice", "expected an array");
        for (const auto& c : choices) {
          if (!c.is_string()) field_error("choice", "expected strings");
          item.options.push_back(c.get<std::string>());
        }
        const auto answer = required_string(entry, "answer");
        const auto it = std::find(item.options.begin(), item.options.end(), answer);
        if (it == item.options.end()) field_error("answer", "'" + answer + "' is not one of the choices");
        item.answer_index = static_cast<int>(it - item.options.begin());
        item.meta["dataset"] = "dream";
        item.meta["dialogue_id"] = dialogue_id;
        check_item(item);
        return item;
      }));
    }
  }
  return corpus;
}

// ---- debater_csv -----------------------------------------------------------

// RFC 4180 records: quoted fields may contain commas, quotes ("") and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell.push_back(c);
      any = true;
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

Corpus load_debater(const fs::path& path) {
  const auto rows = at_record(path, 0, [&] { return parse_csv(read_file(path)); });
  if (rows.empty()) throw DataError(path.string() + ": missing header row");
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < rows[0].size(); ++c) column[lower(trim(rows[0][c]))] = c;
  for (const auto* name : {"speech", "topic", "stance", "kind"}) {
    if (!column.contains(name))
      throw DataError(path.string() + ": header: field '" + name + "': missing column");
  }
  const bool has_id = column.contains("id");

  Corpus corpus{path.stem().string(), {}};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::size_t record = r - 1;
    corpus.items.push_back(at_record(path, record, [&] {
      const auto& row = rows[r];
      auto cell = [&](const std::string& name) -> std::string {
        const auto c = column.at(name);
        if (c >= row.size()) field_error(name, "missing cell");
        return row[c];
      };
      const auto speech = cell("speech");
      const auto topic = trim(cell("topic"));
      if (trim(speech).empty()) field_error("speech", "empty");
      if (topic.empty()) field_error("topic", "empty");
      Stance stance;
      ContextKind kind;
      try {
        stance = parse_stance(trim(cell("stance")));
      } catch (const std::invalid_argument& e) {
        field_error("stance", e.what());
      }
      try {
        auto k = lower(trim(cell("kind")));
        if (k == "manual") k = "speech_manual";
        if (k == "asr") k = "speech_asr";
        kind = parse_context_kind(k);
        if (kind != ContextKind::speech_manual && kind != ContextKind::speech_asr)
          field_error("kind", "expected speech_manual or speech_asr");
      } catch (const std::invalid_argument& e) {
        field_error("kind", e.what());
      }
      auto id = has_id ? trim(cell("id")) : "debater-" + std::to_string(record);
      auto item = build_debate_item(std::move(id), speech, topic, stance, kind);
      item.meta["dataset"] = "ibm_debater";
      check_item(item);
      return item;
    }));
  }
  return corpus;
}

}  // namespace

std::string_view to_string(ContextKind kind) noexcept {
  return kContextKindNames[static_cast<std::size_t>(kind)];
}

ContextKind parse_context_kind(std::string_view text) {
  for (std::size_t i = 0; i < kContextKindNames.size(); ++i) {
    if (kContextKindNames[i] == text) return static_cast<ContextKind>(i);
  }
  throw std::invalid_argument("unknown context_kind '" + std::string(text) + "'");
}

CorpusFormat parse_corpus_format(std::string_view tag) {
  if (tag == "canonical_jsonl") return CorpusFormat::canonical_jsonl;
  if (tag == "race_dir") return CorpusFormat::race_dir;
  if (tag == "dream_json") return CorpusFormat::dream_json;
  if (tag == "debater_csv") return CorpusFormat::debater_csv;
  throw std::invalid_argument("unknown corpus format '" + std::string(tag) + "'");
}

std::string_view to_string(CorpusFormat format) noexcept {
  switch (format) {
    case CorpusFormat::canonical_jsonl: return "canonical_jsonl";
    case CorpusFormat::race_dir: return "race_dir";
    case CorpusFormat::dream_json: return "dream_json";
    case CorpusFormat::debater_csv: return "debater_csv";
  }
  return "?";
}

std::vector<Violation> validate_item(const McqItem& item) {
  std::vector<Violation> out;
  if (item.id.empty()) out.push_back({item.id, "id", "empty id"});
  if (item.question.empty()) out.push_back({item.id, "question", "empty question"});
  if (item.options.size() < 2) {
    out.push_back({item.id, "options", "need at least 2 options, have " + std::to_string(item.options.size())});
  }
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    if (item.options[i].empty()) out.push_back({item.id, "options", "option " + std::to_string(i) + " is empty"});
  }
  if (item.answer_index < 0 || item.answer_index >= item.option_count()) {
    out.push_back({item.id, "answer_index",
                   "answer_index " + std::to_string(item.answer_index) + " outside [0, " +
                       std::to_string(item.options.size()) + ")"});
  }
  return out;
}

std::vector<Violation> validate(const Corpus& corpus) {
  std::vector<Violation> out;
  std::unordered_map<std::string_view, std::size_t> first_seen;
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    const auto& item = corpus.items[i];
    auto item_violations = validate_item(item);
    out.insert(out.end(), item_violations.begin(), item_violations.end());
    const auto [it, inserted] = first_seen.emplace(item.id, i);
    if (!inserted) {
      out.push_back({item.id, "duplicate_id",
                     "id at positions " + std::to_string(it->second) + " and " + std::to_string(i)});
    }
  }
  return out;
}

void require_valid(const Corpus& corpus) {
  if (corpus.items.empty()) throw DataError("corpus '" + corpus.name + "' is empty");
  const auto violations = validate(corpus);
  if (violations.empty()) return;
  std::string msg = "corpus '" + corpus.name + "' has " + std::to_string(violations.size()) + " violation(s)";
  for (std::size_t i = 0; i < violations.size() && i < 5; ++i) {
    msg += "; " + violations[i].item_id + ": " + violations[i].rule + ": " + violations[i].detail;
  }
  throw DataError(msg);
}

Corpus load_corpus(const fs::path& path, CorpusFormat format, const LoadOptions& options) {
  if (!fs::exists(path)) throw DataError(path.string() + ": no such file or directory");
  Corpus corpus;
  switch (format) {
    case CorpusFormat::canonical_jsonl: corpus = load_jsonl(path); break;
    case CorpusFormat::race_dir: corpus = load_race_dir(path); break;
    case CorpusFormat::dream_json: corpus = load_dream(path, options); break;
    case CorpusFormat::debater_csv: corpus = load_debater(path); break;
  }
  check_unique_ids(corpus, path);
  return corpus;
}

std::string build_dialogue_context(std::span<const Turn> turns, bool keep_speakers) {
  if (turns.empty()) throw std::invalid_argument("build_dialogue_context: no turns");
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i > 0) out += '\n';
    if (keep_speakers && !turns[i].speaker.empty()) {
      out += turns[i].speaker;
      out += ": ";
    }
    out += turns[i].utterance;
  }
  return out;
}

Turn parse_turn(std::string_view line) {
  const auto colon = line.find(": ");
  if (colon == std::string_view::npos) return {"", trim(line)};
  return {trim(line.substr(0, colon)), trim(line.substr(colon + 2))};
}

Stance parse_stance(std::string_view text) {
  const auto t = lower(text);
  if (t == "pro" || t == "for") return Stance::pro;
  if (t == "con" || t == "against") return Stance::con;
  throw std::invalid_argument("unknown stance '" + std::string(text) + "'");
}

McqItem build_debate_item(std::string id, std::string speech, std::string_view topic, Stance stance,
                          ContextKind kind) {
  if (speech.empty()) throw std::invalid_argument("build_debate_item: empty speech");
  if (topic.empty()) throw std::invalid_argument("build_debate_item: empty topic");
  McqItem item;
  item.id = std::move(id);
  item.context = std::move(speech);
  item.context_kind = kind;
  item.question = std::string(kDebateQuestionPrefix) + std::string(topic) + "?";
  item.options = {"for", "against"};
  item.answer_index = stance == Stance::pro ? 0 : 1;
  item.meta["topic"] = std::string(topic);
  return item;
}

nlohmann::ordered_json item_to_json(const McqItem& item) {
  nlohmann::ordered_json j;
  j["id"] = item.id;
  j["context"] = item.context;
  j["context_kind"] = to_string(item.context_kind);
  j["question"] = item.question;
  j["options"] = item.options;
  j["answer_index"] = item.answer_index;
  j["meta"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : item.meta) j["meta"][k] = v;
  return j;
}

McqItem item_from_json(const json& record) {
  if (!record.is_object()) throw DataError("expected a JSON object");
  McqItem item;
  item.id = required_string(record, "id");
  if (const auto it = record.find("context"); it != record.end()) {
    if (!it->is_string()) field_error("context", "expected a string");
    item.context = it->get<std::string>();
  }
  if (const auto it = record.find("context_kind"); it != record.end()) {
    if (!it->is_string()) field_error("context_kind", "expected a string");
    try {
      item.context_kind = parse_context_kind(it->get<std::string>());
    } catch (const std::invalid_argument& e) {
      field_error("context_kind", e.what());
    }
  }
  item.question = required_string(record, "question");
  const auto& options = required(record, "options");
  if (!options.is_array()) field_error("options", "expected an array");
  for (const auto& o : options) {
    if (!o.is_string()) field_error("options", "expected strings");
    item.options.push_back(o.get<std::string>());
  }
  const auto& answer = required(record, "answer_index");
  if (!answer.is_number_integer()) field_error("answer_index", "expected an integer");
  const auto answer_value = answer.get<long long>();
  if (answer_value < 0 || answer_value >= static_cast<long long>(item.options.size())) {
    field_error("answer_index", std::to_string(answer_value) + " outside [0, " +
                                    std::to_string(item.options.size()) + ")");
  }
  item.answer_index = static_cast<int>(answer_value);
  if (const auto it = record.find("meta"); it != record.end()) {
    if (!it->is_object()) field_error("meta", "expected an object");
    for (const auto& [k, v] : it->items()) item.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  static constexpr std::array<std::string_view, 7> known = {
      "id", "context", "context_kind", "question", "options", "answer_index", "meta"};
  for (const auto& [k, v] : record.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      item.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  check_item(item);
  return item;
}

void write_canonical_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& item : corpus.items) out << item_to_json(item).dump() << '\n';
}

void save_canonical_jsonl(const Corpus& corpus, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  write_canonical_jsonl(corpus, out);
}

Corpus read_canonical_jsonl(std::istream& in, std::string name, std::string_view source) {
  Corpus corpus{std::move(name), {}};
  std::string line;
  std::size_t record = 0;
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      corpus.items.push_back(item_from_json(json::parse(line)));
    } catch (const DataError& e) {
      throw DataError(std::string(source) + ": record " + std::to_string(record) + ": " + e.what());
    } catch (const json::exception& e) {
      throw DataError(std::string(source) + ": record " + std::to_string(record) + ": " + e.what());
    }
    const auto [it, inserted] = seen.emplace(corpus.items.back().id, record);
    if (!inserted) {
      throw DataError(std::string(source) + ": record " + std::to_string(record) +
                      ": field 'id': duplicate of record " + std::to_string(it->second));
    }
    ++record;
  }
  return corpus;
}

}  // namespace compre
