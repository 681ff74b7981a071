#include "compre/synth.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "compre/random.hpp"
#include "compre/textproc.hpp"

namespace compre {

std::string_view to_string(PositionProfile profile) noexcept {
  switch (profile) {
    case PositionProfile::front: return "front";
    case PositionProfile::uniform: return "uniform";
    case PositionProfile::end: return "end";
  }
  return "?";
}

PositionProfile parse_position_profile(std::string_view text) {
  if (text == "front") return PositionProfile::front;
  if (text == "uniform") return PositionProfile::uniform;
  if (text == "end") return PositionProfile::end;
  throw std::invalid_argument("unknown position profile '" + std::string(text) + "'");
}

void SynthSpec::validate() const {
  if (size < 1) throw std::invalid_argument("synth size must be >= 1");
  if (n_options < 2) throw std::invalid_argument("synth n_options must be >= 2");
  if (!(leak_rate >= 0.0 && leak_rate <= 1.0)) throw std::invalid_argument("synth leak_rate must be in [0, 1]");
  if (context_len < 10) throw std::invalid_argument("synth context_len must be >= 10");
  if (question_len < 1) throw std::invalid_argument("synth question_len must be >= 1");
  if (vocab_size < size) {
    throw std::invalid_argument("synth vocab_size " + std::to_string(vocab_size) + " cannot give " +
                                std::to_string(size) + " items a unique keyword");
  }
  if (vocab_size < n_options + 1) {
    throw std::invalid_argument("synth vocab_size must exceed n_options so filler tokens exist");
  }
}

nlohmann::json to_json(const SynthSpec& s) {
  return {{"size", s.size},
          {"n_options", s.n_options},
          {"leak_rate", s.leak_rate},
          {"position_profile", to_string(s.position_profile)},
          {"context_len", s.context_len},
          {"vocab_size", s.vocab_size},
          {"question_len", s.question_len},
          {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  s.size = j.at("size").get<int>();
  s.n_options = j.at("n_options").get<int>();
  s.leak_rate = j.at("leak_rate").get<double>();
  s.position_profile = parse_position_profile(j.at("position_profile").get<std::string>());
  s.context_len = j.at("context_len").get<int>();
  s.vocab_size = j.at("vocab_size").get<int>();
  s.question_len = j.value("question_len", 4);
  s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

std::string synth_token(int index) { return "w" + std::to_string(index); }

namespace {

std::string join(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += synth_token(ids[i]);
  }
  return out;
}

}  // namespace

Corpus generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 engine(splitmix64(spec.seed));
  const auto vocab = static_cast<std::uint64_t>(spec.vocab_size);
  auto draw = [&](std::uint64_t n) { return static_cast<int>(uniform_below(engine, n)); };

  // Unique answer keywords via a partial Fisher-Yates over the vocabulary.
  std::vector<int> pool(static_cast<std::size_t>(spec.vocab_size));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < spec.size; ++i) {
    const auto j = static_cast<std::size_t>(i + draw(vocab - static_cast<std::uint64_t>(i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }

  // Planted positions share the extraction rounding rule, so "front" is
  // exactly the window a beginning extract at tau=20 keeps.
  const auto len = static_cast<std::size_t>(spec.context_len);
  const auto band = static_cast<int>(retained_count(len, 20));

  Corpus corpus{"synth-" + std::string(to_string(spec.position_profile)) + "-" + std::to_string(spec.seed), {}};
  corpus.items.reserve(static_cast<std::size_t>(spec.size));
  for (int i = 0; i < spec.size; ++i) {
    const int keyword = pool[static_cast<std::size_t>(i)];
    std::vector<int> distractors;
    while (static_cast<int>(distractors.size()) < spec.n_options - 1) {
      const int t = draw(vocab);
      if (t != keyword && std::find(distractors.begin(), distractors.end(), t) == distractors.end()) {
        distractors.push_back(t);
      }
    }
    auto filler = [&] {
      while (true) {
        const int t = draw(vocab);
        if (t != keyword && std::find(distractors.begin(), distractors.end(), t) == distractors.end()) return t;
      }
    };

    std::vector<int> context(len);
    for (auto& t : context) t = filler();
    int position = 0;
    switch (spec.position_profile) {
      case PositionProfile::front: position = draw(static_cast<std::uint64_t>(band)); break;
      case PositionProfile::end: position = spec.context_len - band + draw(static_cast<std::uint64_t>(band)); break;
      case PositionProfile::uniform: position = draw(len); break;
    }
    context[static_cast<std::size_t>(position)] = keyword;

    std::vector<int> question(static_cast<std::size_t>(spec.question_len));
    for (auto& t : question) t = filler();
    const bool leaked = uniform_unit(engine) < spec.leak_rate;
    if (leaked) question[static_cast<std::size_t>(draw(question.size()))] = keyword;

    const int gold = draw(static_cast<std::uint64_t>(spec.n_options));

    McqItem item;
    item.id = "synth-" + std::to_string(i);
    item.context = join(context);
    item.context_kind = ContextKind::passage;
    item.question = join(question) + " ?";
    for (int o = 0, d = 0; o < spec.n_options; ++o) {
      item.options.push_back(synth_token(o == gold ? keyword : distractors[static_cast<std::size_t>(d++)]));
    }
    item.answer_index = gold;
    item.meta["dataset"] = "synth";
    item.meta["keyword"] = synth_token(keyword);
    item.meta["keyword_position"] = std::to_string(position);
    item.meta["leaked"] = leaked ? "true" : "false";
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

double oracle_context_free_accuracy(const SynthSpec& spec) {
  spec.validate();
  return spec.leak_rate + (1.0 - spec.leak_rate) / static_cast<double>(spec.n_options);
}

}  // namespace compre
