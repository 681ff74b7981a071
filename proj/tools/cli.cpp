#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "compre/ablation.hpp"
#include "compre/corpus.hpp"
#include "compre/ensemble.hpp"
#include "compre/error.hpp"
#include "compre/external_scorer.hpp"
#include "compre/report.hpp"
#include "compre/synth.hpp"
#include "compre/toy_scorer.hpp"

namespace compre::cli {
namespace fs = std::filesystem;

namespace {

// Options shared by every evaluation command.
struct EvalFlags {
  std::vector<std::string> corpora;
  std::string format = "canonical_jsonl";
  std::vector<std::string> scorers;
  int max_len = kDefaultMaxLen;
  int batch_size = 32;
  int workers = 1;
  int timeout_ms = 30000;
  std::uint64_t seed = 0;
  std::string records;
  std::string out;
  std::string manifest;

  EvalOptions eval_options() const { return {max_len, batch_size, workers}; }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;
  RunManifest manifest;
};

void add_eval_flags(CLI::App* sub, EvalFlags& f, bool with_scorer = true) {
  sub->add_option("--corpus", f.corpora, "Corpus file(s)")->required();
  sub->add_option("--format", f.format, "Corpus format")
      ->check(CLI::IsMember({"canonical_jsonl", "race_dir", "dream_json", "debater_csv"}));
  if (with_scorer) {
    sub->add_option("--scorer", f.scorers,
                    "Toy params file, http://host:port/path or exec:program; repeat for an ensemble")
        ->required();
  }
  sub->add_option("--max-len", f.max_len, "Maximum input length in tokens")->check(CLI::Range(3, 1 << 20));
  sub->add_option("--batch-size", f.batch_size, "Items per scorer call")->check(CLI::PositiveNumber);
  sub->add_option("--workers", f.workers, "Concurrent scorer calls")->check(CLI::PositiveNumber);
  sub->add_option("--timeout-ms", f.timeout_ms, "External scorer timeout")->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Seed for random extracts")->envname("COMPRE_PROBE_SEED");
  sub->add_option("--records", f.records, "Write EvalRecord JSONL here");
  sub->add_option("--out", f.out, "Output file");
  sub->add_option("--manifest", f.manifest, "Run manifest path (default <out>.manifest.json)");
}

std::shared_ptr<const Scorer> make_single_scorer(const std::string& spec, int timeout_ms) {
  if (spec.starts_with("http://") || spec.starts_with("https://") || spec.starts_with("exec:")) {
    auto endpoint = Endpoint::parse(spec);
    endpoint.timeout = std::chrono::milliseconds(timeout_ms);
    return std::make_shared<ExternalScorer>(endpoint);
  }
  return std::make_shared<ToyScorer>(load_params(spec), fs::path(spec).filename().string());
}

std::shared_ptr<const Scorer> make_scorer(const std::vector<std::string>& specs, int timeout_ms) {
  if (specs.size() == 1) return make_single_scorer(specs.front(), timeout_ms);
  std::vector<std::shared_ptr<const Scorer>> members;
  for (const auto& s : specs) members.push_back(make_single_scorer(s, timeout_ms));
  return std::make_shared<EnsembleScorer>(std::move(members));
}

Corpus load_tracked(Context& ctx, const std::string& path, const std::string& format) {
  auto corpus = load_corpus(path, parse_corpus_format(format));
  const auto fp = fs::is_regular_file(path) ? fingerprint_file(path) : std::string("directory");
  ctx.manifest.corpora.push_back({path, fp});
  return corpus;
}

void write_records(Context& ctx, const std::string& path, std::span<const EvalRecord> records) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(path + ": cannot open for writing");
  write_records_jsonl(records, f);
  ctx.manifest.artifacts.push_back(path);
}

std::vector<EvalRecord> read_records(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(path + ": cannot open records file");
  return read_records_jsonl(f, path);
}

template <typename Emit>
void write_text_output(Context& ctx, const std::string& path, Emit&& emit) {
  std::ostringstream buf;
  emit(buf);
  ctx.out << buf.str();
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(path + ": cannot open for writing");
  f << buf.str();
  ctx.manifest.artifacts.push_back(path);
}

std::string with_suffix(const std::string& path, int k) {
  const fs::path p(path);
  return (p.parent_path() / (p.stem().string() + "-" + std::to_string(k) + p.extension().string())).string();
}

// ---- subcommands ------------------------------------------------------------

struct IngestFlags {
  std::string format;
  std::string in;
  std::string out;
  bool drop_speakers = false;
};

void run_ingest(Context& ctx, const IngestFlags& f) {
  LoadOptions options;
  options.keep_speakers = !f.drop_speakers;
  const auto corpus = load_corpus(f.in, parse_corpus_format(f.format), options);
  ctx.manifest.corpora.push_back({f.in, fs::is_regular_file(f.in) ? fingerprint_file(f.in) : "directory"});
  save_canonical_jsonl(corpus, f.out);
  ctx.manifest.artifacts.push_back(f.out);
  ctx.out << "ingested " << corpus.items.size() << " items from " << f.in << " -> " << f.out << '\n';
}

struct SynthFlags {
  SynthSpec spec;
  std::string profile = "uniform";
  std::string out;
};

void run_synth(Context& ctx, SynthFlags f) {
  f.spec.position_profile = parse_position_profile(f.profile);
  const auto corpus = generate(f.spec);
  save_canonical_jsonl(corpus, f.out);
  const auto spec_path = f.out + ".spec.json";
  std::ofstream(spec_path, std::ios::binary) << to_json(f.spec).dump(2) << '\n';
  ctx.manifest.seeds.push_back(f.spec.seed);
  ctx.manifest.artifacts.insert(ctx.manifest.artifacts.end(), {f.out, spec_path});
  ctx.out << "generated " << corpus.items.size() << " items -> " << f.out << '\n';
}

struct TrainFlags {
  std::string corpus;
  std::string format = "canonical_jsonl";
  std::string condition = "standard";
  TrainConfig cfg;
  int members = 1;
  std::string out;
};

void run_train(Context& ctx, const TrainFlags& f) {
  const auto corpus = load_tracked(ctx, f.corpus, f.format);
  const auto mode = parse_context_mode(f.condition);
  for (int k = 0; k < f.members; ++k) {
    auto cfg = f.cfg;
    cfg.seed = f.cfg.seed + static_cast<std::uint64_t>(k);
    const auto result = train_toy(corpus, cfg, mode);
    const auto path = f.members == 1 ? f.out : with_suffix(f.out, k);
    nlohmann::json info = to_json(cfg);
    info["context_mode"] = to_string(mode);
    info["corpus"] = f.corpus;
    info["epoch_loss"] = result.epoch_loss;
    save_params(result.params, path, info);
    ctx.manifest.seeds.push_back(cfg.seed);
    ctx.manifest.artifacts.push_back(path);
    ctx.out << "trained " << to_string(mode) << " toy scorer (seed " << cfg.seed << ", "
            << result.params.vocab.size() << " vocab) final loss " << format_fixed(result.epoch_loss.back(), 4)
            << " -> " << path << '\n';
  }
}

struct EvalCmdFlags {
  EvalFlags common;
  std::string condition = "standard";
  int tau = 100;
  std::string mode = "beginning";
};

void run_eval(Context& ctx, const EvalCmdFlags& f) {
  const auto scorer = make_scorer(f.common.scorers, f.common.timeout_ms);
  ctx.manifest.scorers.push_back(scorer->id());
  ctx.manifest.seeds.push_back(f.common.seed);
  Condition condition{parse_context_mode(f.condition), std::nullopt};
  if (condition.context_mode == ContextMode::standard && f.tau != 100) {
    condition.extract = ExtractSpec{f.tau, parse_extract_mode(f.mode), f.common.seed};
  } else if (condition.context_mode == ContextMode::context_free && f.tau != 100) {
    throw std::invalid_argument("--tau applies to standard context mode only");
  }
  std::vector<EvalRecord> all;
  write_text_output(ctx, f.common.out, [&](std::ostream& os) {
    os << "corpus,scorer,condition,accuracy,n\n";
    for (const auto& path : f.common.corpora) {
      const auto corpus = load_tracked(ctx, path, f.common.format);
      auto result = evaluate(*scorer, corpus, condition, f.common.eval_options());
      os << corpus.name << ',' << scorer->id() << ',' << to_string(condition.context_mode);
      if (condition.extract) os << '@' << condition.extract->tau << ':' << to_string(condition.extract->mode);
      os << ',' << format_fixed(result.accuracy, 3) << ',' << corpus.items.size() << '\n';
      all.insert(all.end(), result.records.begin(), result.records.end());
    }
  });
  write_records(ctx, f.common.records, all);
}

std::vector<int> parse_taus(const std::vector<int>& taus) { return taus.empty() ? default_tau_grid() : taus; }

struct SweepFlags {
  EvalFlags common;
  std::string mode = "beginning";
  std::vector<int> taus;
  int repetitions = 1;
  std::string svg;
};

void run_sweep(Context& ctx, const SweepFlags& f) {
  const auto scorer = make_scorer(f.common.scorers, f.common.timeout_ms);
  ctx.manifest.scorers.push_back(scorer->id());
  ctx.manifest.seeds.push_back(f.common.seed);
  if (f.common.corpora.size() != 1) throw std::invalid_argument("sweep takes exactly one --corpus");
  const auto corpus = load_tracked(ctx, f.common.corpora.front(), f.common.format);
  const auto taus = parse_taus(f.taus);
  const auto result = sweep_tau(*scorer, corpus, taus, parse_extract_mode(f.mode), f.common.seed,
                                SweepOptions{f.common.eval_options(), f.repetitions});
  write_text_output(ctx, f.common.out, [&](std::ostream& os) { write_curve_csv(result.curve, os); });
  std::vector<EvalRecord> all;
  for (const auto& r : result.records) all.insert(all.end(), r.begin(), r.end());
  write_records(ctx, f.common.records, all);
  if (!f.svg.empty()) {
    std::ofstream(f.svg, std::ios::binary) << render_curve_svg(std::span(&result.curve, 1), random_baseline(corpus));
    ctx.manifest.artifacts.push_back(f.svg);
  }
}

struct PositionalFlags {
  EvalFlags common;
  int tau = 20;
  int repetitions = 1;
  std::vector<std::string> names;
};

void run_positional(Context& ctx, const PositionalFlags& f) {
  const auto scorer = make_scorer(f.common.scorers, f.common.timeout_ms);
  ctx.manifest.scorers.push_back(scorer->id());
  ctx.manifest.seeds.push_back(f.common.seed);
  if (!f.names.empty() && f.names.size() != f.common.corpora.size()) {
    throw std::invalid_argument("--names needs one entry per --corpus");
  }
  std::vector<PositionalColumn> columns;
  std::vector<EvalRecord> all;
  for (std::size_t c = 0; c < f.common.corpora.size(); ++c) {
    const auto corpus = load_tracked(ctx, f.common.corpora[c], f.common.format);
    PositionalColumn column{f.names.empty() ? corpus.name : f.names[c], {}};
    const int grid[] = {f.tau};
    for (auto mode : {ExtractMode::beginning, ExtractMode::random_window, ExtractMode::end}) {
      const auto sweep = sweep_tau(*scorer, corpus, grid, mode, f.common.seed,
                                   SweepOptions{f.common.eval_options(), f.repetitions});
      column.rows.push_back({mode, sweep.curve.points.front().accuracy});
      all.insert(all.end(), sweep.records.front().begin(), sweep.records.front().end());
    }
    columns.push_back(std::move(column));
  }
  write_text_output(ctx, f.common.out, [&](std::ostream& os) { write_positional_table(columns, os); });
  write_records(ctx, f.common.records, all);
}

struct WkFlags {
  EvalFlags common;
  std::vector<std::string> standard;
  std::vector<std::string> context_free;
};

void run_wkreport(Context& ctx, const WkFlags& f) {
  const auto standard = make_scorer(f.standard, f.common.timeout_ms);
  const auto context_free = make_scorer(f.context_free, f.common.timeout_ms);
  ctx.manifest.scorers = {standard->id(), context_free->id()};
  std::vector<Corpus> corpora;
  for (const auto& path : f.common.corpora) corpora.push_back(load_tracked(ctx, path, f.common.format));

  WorldKnowledgeReport report;
  std::vector<EvalRecord> all;
  for (const auto& corpus : corpora) {
    const auto std_result = evaluate(*standard, corpus, {ContextMode::standard, std::nullopt}, f.common.eval_options());
    const auto cf_result =
        evaluate(*context_free, corpus, {ContextMode::context_free, std::nullopt}, f.common.eval_options());
    const double cf = cf_result.accuracy;
    report.rows.push_back({corpus.name, std_result.accuracy, cf, random_baseline(corpus), effective_options(cf),
                           corpus.items.size()});
    all.insert(all.end(), std_result.records.begin(), std_result.records.end());
    all.insert(all.end(), cf_result.records.begin(), cf_result.records.end());
  }
  write_text_output(ctx, f.common.out, [&](std::ostream& os) { write_world_knowledge_csv(report, os); });
  write_records(ctx, f.common.records, all);
}

struct ClassifyFlags {
  std::string sweep_records;
  std::string cf_records;
  std::vector<int> taus;
  std::string out;
  std::string manifest;
};

void run_classify(Context& ctx, const ClassifyFlags& f) {
  const auto sweep = read_records(f.sweep_records);
  const auto cf = read_records(f.cf_records);
  ctx.manifest.corpora.push_back({f.sweep_records, fingerprint_file(f.sweep_records)});
  ctx.manifest.corpora.push_back({f.cf_records, fingerprint_file(f.cf_records)});
  const auto grid = parse_taus(f.taus);
  const auto labels = classify_records(sweep, cf, grid);
  std::ostringstream buf;
  write_labels_csv(labels, buf);
  if (!f.out.empty()) {
    std::ofstream file(f.out, std::ios::binary);
    if (!file) throw DataError(f.out + ": cannot open for writing");
    file << buf.str();
    ctx.manifest.artifacts.push_back(f.out);
  } else {
    ctx.out << buf.str();
  }
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& l : labels) ++counts[static_cast<int>(l.label.level)];
  ctx.err << "zero " << counts[0] << ", partial " << counts[1] << ", full " << counts[2] << '\n';
}

std::string manifest_path(const std::string& explicit_path, const std::string& out) {
  if (!explicit_path.empty()) return explicit_path;
  if (!out.empty()) return out + ".manifest.json";
  return {};
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return dispatch(args, out, err, 0);
}

namespace {

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.starts_with(flag + "="); });
}

// Inlines `--config FILE` as explicit `--key=value` flags placed right after
// the subcommand, skipping keys already given on the command line. Doing this
// up front keeps flag > file > environment precedence and lets the manifest
// record a self-contained argv.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 == args.size()) throw std::invalid_argument("--config requires a file argument");
      file = args[++i];
    } else if (args[i].starts_with("--config=")) {
      file = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (file.empty()) return rest;
  std::ifstream in(file);
  if (!in) throw DataError("cannot open config file " + file);
  std::vector<std::string> inlined;
  for (const auto& item : CLI::ConfigTOML().from_config(in)) {
    if (item.name.empty() || item.name == "++" || item.name == "--") continue;  // section markers
    const auto flag = "--" + item.fullname();
    if (has_flag(rest, flag)) continue;
    if (item.inputs.empty()) inlined.push_back(flag);
    for (const auto& value : item.inputs) inlined.push_back(flag + "=" + value);
  }
  rest.insert(rest.begin() + (rest.empty() ? 0 : 1), inlined.begin(), inlined.end());
  return rest;
}

int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err, int depth) {
  CLI::App app{"Profile how much of a context passage multiple-choice questions need", "compre-probe"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  Context ctx{out, err, args, {}};
  std::function<void()> action;
  std::string manifest_target;

  // --config is consumed by expand_config; the option only documents it.
  std::string unused_config;
  auto with_config = [&unused_config](CLI::App* sub) {
    sub->add_option("--config", unused_config, "Flat key=value file; command-line flags take precedence");
    return sub;
  };

  IngestFlags ingest;
  auto* ingest_cmd = with_config(app.add_subcommand("ingest", "Convert a dataset into canonical JSONL"));
  ingest_cmd->add_option("--format", ingest.format, "Input format")
      ->required()
      ->check(CLI::IsMember({"canonical_jsonl", "race_dir", "dream_json", "debater_csv"}));
  ingest_cmd->add_option("--in", ingest.in, "Input file or directory")->required();
  ingest_cmd->add_option("--out", ingest.out, "Output JSONL")->required();
  ingest_cmd->add_flag("--drop-speakers", ingest.drop_speakers, "Omit speaker tags from dialogue contexts");
  ingest_cmd->callback([&] {
    action = [&] { run_ingest(ctx, ingest); };
    manifest_target = manifest_path("", ingest.out);
  });

  SynthFlags synth;
  auto* synth_cmd = with_config(app.add_subcommand("synth", "Generate a synthetic corpus with planted keywords"));
  synth_cmd->add_option("--size", synth.spec.size, "Number of items");
  synth_cmd->add_option("--options", synth.spec.n_options, "Options per item");
  synth_cmd->add_option("--leak", synth.spec.leak_rate, "Probability the question contains the answer keyword");
  synth_cmd->add_option("--profile", synth.profile, "Keyword position: front, uniform or end")
      ->check(CLI::IsMember({"front", "uniform", "end"}));
  synth_cmd->add_option("--context-len", synth.spec.context_len, "Context tokens per item");
  synth_cmd->add_option("--vocab", synth.spec.vocab_size, "Vocabulary size");
  synth_cmd->add_option("--question-len", synth.spec.question_len, "Filler tokens per question");
  synth_cmd->add_option("--seed", synth.spec.seed, "Generator seed")->envname("COMPRE_PROBE_SEED");
  synth_cmd->add_option("--out", synth.out, "Output JSONL")->required();
  synth_cmd->callback([&] {
    action = [&] { run_synth(ctx, synth); };
    manifest_target = manifest_path("", synth.out);
  });

  TrainFlags train;
  auto* train_cmd = with_config(app.add_subcommand("train", "Train the built-in toy scorer"));
  train_cmd->add_option("--corpus", train.corpus, "Training corpus")->required();
  train_cmd->add_option("--format", train.format, "Corpus format");
  train_cmd->add_option("--condition", train.condition, "standard or context_free")
      ->check(CLI::IsMember({"standard", "context_free"}));
  train_cmd->add_option("--epochs", train.cfg.epochs, "Training epochs");
  train_cmd->add_option("--lr", train.cfg.learning_rate, "SGD learning rate");
  train_cmd->add_option("--batch", train.cfg.batch_size, "Minibatch size");
  train_cmd->add_option("--dim", train.cfg.embed_dim, "Embedding dimension");
  train_cmd->add_option("--max-len", train.cfg.max_len, "Maximum input length in tokens");
  train_cmd->add_option("--seed", train.cfg.seed, "Initialization and shuffle seed")->envname("COMPRE_PROBE_SEED");
  train_cmd->add_option("--members", train.members, "Ensemble members (seeds seed, seed+1, ...)")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", train.out, "Output params file")->required();
  train_cmd->callback([&] {
    action = [&] { run_train(ctx, train); };
    manifest_target = manifest_path("", train.out);
  });

  EvalCmdFlags eval;
  auto* eval_cmd = with_config(app.add_subcommand("eval", "Accuracy under one condition"));
  add_eval_flags(eval_cmd, eval.common);
  eval_cmd->add_option("--condition", eval.condition, "standard or context_free")
      ->check(CLI::IsMember({"standard", "context_free"}));
  eval_cmd->add_option("--tau", eval.tau, "Percent of context retained")->check(CLI::Range(0, 100));
  eval_cmd->add_option("--mode", eval.mode, "Extract mode")
      ->check(CLI::IsMember({"beginning", "end", "random_window"}));
  eval_cmd->callback([&] {
    action = [&] { run_eval(ctx, eval); };
    manifest_target = manifest_path(eval.common.manifest, eval.common.out);
  });

  SweepFlags sweep;
  auto* sweep_cmd = with_config(app.add_subcommand("sweep", "Accuracy curve over the retained context percentage"));
  add_eval_flags(sweep_cmd, sweep.common);
  sweep_cmd->add_option("--mode", sweep.mode, "Extract mode")
      ->check(CLI::IsMember({"beginning", "end", "random_window"}));
  sweep_cmd->add_option("--taus", sweep.taus, "Tau grid (default 0,10,...,100)")->delimiter(',');
  sweep_cmd->add_option("--repetitions", sweep.repetitions, "Random-window draws per point")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--svg", sweep.svg, "Also render the curve as SVG");
  sweep_cmd->callback([&] {
    action = [&] { run_sweep(ctx, sweep); };
    manifest_target = manifest_path(sweep.common.manifest, sweep.common.out);
  });

  PositionalFlags positional;
  auto* positional_cmd =
      with_config(app.add_subcommand("positional", "Beginning / random / end extracts at one tau"));
  add_eval_flags(positional_cmd, positional.common);
  positional_cmd->add_option("--tau", positional.tau, "Percent of context retained")->check(CLI::Range(0, 100));
  positional_cmd->add_option("--repetitions", positional.repetitions, "Random-window draws")
      ->check(CLI::PositiveNumber);
  positional_cmd->add_option("--names", positional.names, "Column name per corpus")->delimiter(',');
  positional_cmd->callback([&] {
    action = [&] { run_positional(ctx, positional); };
    manifest_target = manifest_path(positional.common.manifest, positional.common.out);
  });

  WkFlags wk;
  auto* wk_cmd = with_config(app.add_subcommand("wkreport", "Standard vs context-free vs random accuracy"));
  add_eval_flags(wk_cmd, wk.common, false);
  wk_cmd->add_option("--standard", wk.standard, "Standard scorer(s)")->required();
  wk_cmd->add_option("--context-free", wk.context_free, "Context-free scorer(s)")->required();
  wk_cmd->callback([&] {
    action = [&] { run_wkreport(ctx, wk); };
    manifest_target = manifest_path(wk.common.manifest, wk.common.out);
  });

  ClassifyFlags classify;
  auto* classify_cmd = with_config(app.add_subcommand("classify", "Label questions zero / partial / full"));
  classify_cmd->add_option("--sweep-records", classify.sweep_records, "Records from `sweep --records`")->required();
  classify_cmd->add_option("--cf-records", classify.cf_records, "Records from a context-free `eval --records`")
      ->required();
  classify_cmd->add_option("--taus", classify.taus, "Tau grid the sweep used")->delimiter(',');
  classify_cmd->add_option("--out", classify.out, "Output CSV");
  classify_cmd->add_option("--manifest", classify.manifest, "Run manifest path");
  classify_cmd->callback([&] {
    action = [&] { run_classify(ctx, classify); };
    manifest_target = manifest_path(classify.manifest, classify.out);
  });

  std::string replay_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", replay_path, "Manifest JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (replay_cmd->parsed()) {
      if (depth > 0) throw std::invalid_argument("a replayed manifest cannot itself be a replay");
      const auto manifest = load_manifest(replay_path);
      return dispatch(manifest.argv, out, err, depth + 1);
    }
    const auto* sub = app.get_subcommands().front();
    ctx.manifest.command = sub->get_name();
    ctx.manifest.argv = args;
    // Pin a seed that came from the environment so a replay does not depend on it.
    if (const auto* seed = sub->get_option_no_throw("--seed");
        seed != nullptr && seed->count() > 0 &&
        std::none_of(args.begin(), args.end(), [](const std::string& a) { return a.starts_with("--seed"); })) {
      ctx.manifest.argv.push_back("--seed");
      ctx.manifest.argv.push_back(seed->as<std::string>());
    }
    ctx.manifest.config = sub->config_to_str(true, false);
    ctx.manifest.started_at = utc_timestamp();
    action();
    ctx.manifest.finished_at = utc_timestamp();
    if (!manifest_target.empty()) save_manifest(ctx.manifest, manifest_target);
    return kExitOk;
  } catch (const ScorerError& e) {
    err << "scorer error: " << e.what() << '\n';
    return kExitScorer;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace
}  // namespace compre::cli
