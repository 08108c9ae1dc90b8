// SPDX-License-Identifier: Apache-2.0
#include "relmusic/cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "relmusic/cli/bench_mem.hpp"
#include "relmusic/cli/skew_check.hpp"
#include "relmusic/codec/augment.hpp"
#include "relmusic/codec/jsb.hpp"
#include "relmusic/codec/note_io.hpp"
#include "relmusic/codec/pedal.hpp"
#include "relmusic/codec/performance.hpp"
#include "relmusic/errors.hpp"
#include "relmusic/model/checkpoint.hpp"
#include "relmusic/model/corpus.hpp"
#include "relmusic/model/gradcheck.hpp"
#include "relmusic/model/sampler.hpp"
#include "relmusic/model/trainer.hpp"

namespace relmusic::cli {

namespace {

using namespace relmusic::model;

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// "-" selects stdin / stdout.
std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream os;
    os << std::cin.rdbuf();
    return os.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open input '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
}

std::vector<int> parse_token_list(std::string text) {
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream in(text);
  return codec::read_tokens(in);
}

// ---- skew-check ----------------------------------------------------------

struct SkewCheckArgs {
  SkewCheckOptions opt;
};

int cmd_skew_check(const SkewCheckArgs& a, Streams s) {
  if (a.opt.trials == 0) {
    s.err << "warning: --trials 0 checks nothing; passing vacuously\n";
  }
  const auto r = run_skew_check(a.opt);
  s.out << "global: L = 1.." << a.opt.max_len << ", " << r.global_instances << " instances\n";
  s.out << "local:  N = 1.." << a.opt.max_block << ", " << r.local_instances << " instances\n";
  s.out << "entries compared: " << r.compared_entries << ", mismatches: " << r.mismatches << " ("
        << fixed(r.seconds, 2) << " s)\n";
  if (!r.passed()) {
    s.out << "first mismatch: " << r.first_mismatch << "\n";
    s.out << "FAIL\n";
    return kExitCheckFailed;
  }
  s.out << "PASS\n";
  return kExitOk;
}

// ---- bench-mem -----------------------------------------------------------

struct BenchArgs {
  std::vector<std::size_t> lengths{650, 2048, 3500};
  std::size_t head_dim = 64;
  std::string precision = "f32";
  double naive_limit_mb = 512.0;
  std::string json_out;
  bool json = false;
  std::uint64_t seed = 1;
};

int cmd_bench_mem(const BenchArgs& a, Streams s) {
  BenchOptions opt;
  opt.lengths = a.lengths;
  opt.head_dim = a.head_dim;
  opt.precision = parse_precision(a.precision);
  if (a.naive_limit_mb < 0) throw ConfigError("--naive-limit-mb must be non-negative");
  opt.naive_limit_bytes = static_cast<std::size_t>(a.naive_limit_mb * 1e6);
  opt.seed = a.seed;
  const auto report = run_bench_mem(opt);
  const auto doc = report.to_json().dump(2) + "\n";
  if (a.json) {
    s.out << doc;
  } else {
    report.print_table(s.out);
  }
  if (!a.json_out.empty()) write_output(a.json_out, doc, s.out);
  return kExitOk;
}

// ---- gradcheck -----------------------------------------------------------

struct GradCheckArgs {
  std::string config;
  std::string attention;
  std::size_t length = 8;
  double tolerance = 1e-5;
  std::uint64_t seed = 1;
};

ModelConfig default_gradcheck_config() {
  ModelConfig c;
  c.vocab_size = 130;
  c.max_len = 8;
  c.depth = 8;
  c.heads = 2;
  c.layers = 2;
  c.feedforward_size = 16;
  c.block_length = 4;
  c.use_pitch_time_relative = true;
  c.max_time_distance = 2;
  c.max_pitch_interval = 3;
  return c;
}

int cmd_gradcheck(const GradCheckArgs& a, Streams s) {
  auto cfg = a.config.empty() ? default_gradcheck_config() : load_config_file(a.config);
  if (a.attention == "global") cfg.attention_mode = AttentionMode::global;
  if (a.attention == "local") cfg.attention_mode = AttentionMode::local;
  cfg.seed = a.seed;
  cfg.validate();
  if (a.length < 2 || a.length > cfg.max_len) {
    throw ConfigError("--length must be in [2, max_len = " + std::to_string(cfg.max_len) + "]");
  }
  std::mt19937_64 rng(a.seed);
  auto w = init_weights(cfg, rng);
  std::uniform_int_distribution<int> tok(0, static_cast<int>(cfg.vocab_size) - 1);
  std::vector<int> tokens(a.length);
  for (auto& t : tokens) t = tok(rng);
  const auto r = gradient_check(cfg, w, tokens);
  s.out << "attention: " << model::to_string(cfg.attention_mode) << ", parameters checked: " << r.checked
        << ", skipped at ReLU kinks: " << r.kinks_skipped << "\n";
  s.out << "max relative error: " << r.max_relative_error << " at " << r.worst_slot << "[" << r.worst_index
        << "] (analytic " << r.analytic_at_worst << ", numeric " << r.numeric_at_worst << ")\n";
  const bool ok = r.max_relative_error < a.tolerance;
  s.out << (ok ? "PASS" : "FAIL") << " (tolerance " << a.tolerance << ")\n";
  return ok ? kExitOk : kExitCheckFailed;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string val;
  std::string out;
  std::size_t steps = 0;
  std::size_t log_every = 100;
  std::uint64_t seed = 1;
  bool seed_given = false;
};

int cmd_train(const TrainArgs& a, Streams s) {
  std::ifstream in(a.config);
  if (!in) throw ConfigError("cannot open config file '" + a.config + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + a.config + "': " + e.what());
  }
  auto cfg = config_from_json(doc);
  auto tcfg = doc.contains("train") ? train_config_from_json(doc["train"]) : TrainConfig{};
  if (a.steps) tcfg.steps = a.steps;
  if (a.seed_given) {
    cfg.seed = a.seed;
    tcfg.seed = a.seed;
  }
  const auto train_set = load_corpus_dir(a.corpus);
  Corpus val_set;
  if (!a.val.empty()) val_set = load_corpus_dir(a.val);

  TrainCallbacks cb;
  cb.on_step = [&](const StepMetrics& m) {
    if (a.log_every && m.step % a.log_every == 0) {
      s.out << "step " << m.step << " loss " << fixed(m.loss, 6) << " grad_norm " << fixed(m.grad_norm, 4) << " lr "
            << m.learning_rate << "\n";
    }
  };
  cb.on_eval = [&](const EvalMetrics& m) { s.out << "step " << m.step << " val_nll " << fixed(m.nll, 6) << "\n"; };
  cb.on_checkpoint = [&](std::size_t step, const ModelWeights& w) {
    save_checkpoint(a.out + ".step" + std::to_string(step), cfg, w, step);
  };
  const auto r = train(cfg, tcfg, train_set, a.val.empty() ? nullptr : &val_set, cb);
  const bool use_best = !a.val.empty() && !r.evals.empty();
  save_checkpoint(a.out, cfg, use_best ? r.best_weights : r.weights, use_best ? r.best_step : r.steps_taken);
  s.out << "trained " << r.steps_taken << " steps" << (r.stopped_early ? " (early stop)" : "")
        << (r.reached_target ? " (target reached)" : "") << "\n";
  if (use_best) s.out << "best val_nll " << fixed(r.best_val_nll, 6) << " at step " << r.best_step << "\n";
  s.out << "wrote " << a.out << "\n";
  return kExitOk;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string corpus;
  std::string config;
  std::size_t length = 0;
  bool extrapolate = false;
  std::uint64_t seed = 1;
};

int cmd_eval(const EvalArgs& a, Streams s) {
  const auto ck = load_checkpoint(a.ckpt);
  if (!a.config.empty()) require_compatible(ck.config, load_config_file(a.config));
  const auto corpus = load_corpus_dir(a.corpus);
  check_vocabulary(corpus, ck.config.vocab_size);
  const std::size_t len = a.length ? a.length : ck.config.max_len;
  const auto crops = tile_crops(corpus, len);
  s.out << fixed(corpus_nll(ck.config, ck.weights, crops, a.extrapolate), 6) << "\n";
  return kExitOk;
}

// ---- sample --------------------------------------------------------------

struct SampleArgs {
  std::string ckpt;
  std::string prime;
  std::string prime_file;
  std::size_t length = 0;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  std::string trace_out;
  std::string out = "-";
  bool extrapolate = false;
};

int cmd_sample(const SampleArgs& a, Streams s) {
  const auto ck = load_checkpoint(a.ckpt);
  std::vector<int> prime;
  if (!a.prime_file.empty()) {
    prime = codec::read_tokens_file(a.prime_file);
  } else {
    prime = parse_token_list(a.prime);
  }
  SampleOptions opt;
  opt.length = a.length ? a.length : ck.config.max_len;
  opt.temperature = a.temperature;
  opt.seed = a.seed;
  opt.trace = !a.trace_out.empty();
  opt.extrapolate_positions = a.extrapolate;
  const auto r = sample(ck.config, ck.weights, prime, opt);
  std::ostringstream tokens;
  codec::write_tokens(tokens, r.tokens);
  write_output(a.out, tokens.str(), s.out);
  if (opt.trace) write_output(a.trace_out, r.trace.to_json().dump() + "\n", s.out);
  return kExitOk;
}

// ---- encode / decode -----------------------------------------------------

struct CodecArgs {
  std::string codec = "performance";
  std::string in = "-";
  std::string out = "-";
  bool ignore_pedal = false;
  int transpose = 0;
  double stretch = 1.0;
  bool random_augment = false;
  std::uint64_t seed = 1;
};

void report_diagnostics(const codec::Diagnostics& d, std::ostream& err) {
  for (const auto& line : d) err << "warning: " << line << "\n";
}

int cmd_encode(const CodecArgs& a, Streams s) {
  std::istringstream in(read_input(a.in));
  std::ostringstream out;
  if (a.codec == "jsb") {
    codec::write_tokens(out, codec::jsb_serialize(codec::read_grid(in)).ids);
  } else if (a.codec == "performance") {
    auto list = codec::read_note_list(in);
    auto notes = a.ignore_pedal ? list.notes : codec::apply_sustain_pedal(list.notes, list.pedals);
    codec::Augmentation aug{a.transpose, a.stretch};
    if (a.random_augment) {
      std::mt19937_64 rng(a.seed);
      aug = codec::sample_augmentation(rng);
    }
    codec::Diagnostics diag;
    if (aug.transpose != 0 || aug.stretch != 1.0) notes = codec::augment(notes, aug, &diag);
    const auto seq = codec::performance_encode(notes, &diag);
    report_diagnostics(diag, s.err);
    codec::write_tokens(out, seq.ids);
  } else {
    throw ConfigError("unknown codec '" + a.codec + "' (expected jsb or performance)");
  }
  write_output(a.out, out.str(), s.out);
  return kExitOk;
}

int cmd_decode(const CodecArgs& a, Streams s) {
  std::istringstream in(read_input(a.in));
  codec::TokenSequence seq;
  seq.ids = codec::read_tokens(in);
  std::ostringstream out;
  if (a.codec == "jsb") {
    seq.codec = codec::CodecId::jsb_grid;
    seq.vocab_size = codec::kJsbVocabSize;
    codec::write_grid(out, codec::jsb_deserialize(seq));
  } else if (a.codec == "performance") {
    seq.codec = codec::CodecId::performance;
    seq.vocab_size = codec::kPerformanceVocabSize;
    const auto decoded = codec::performance_decode(seq);
    report_diagnostics(decoded.diagnostics, s.err);
    codec::write_note_list(out, codec::NoteList{decoded.notes, {}});
  } else {
    throw ConfigError("unknown codec '" + a.codec + "' (expected jsb or performance)");
  }
  write_output(a.out, out.str(), s.out);
  return kExitOk;
}

// ---- make-corpus ---------------------------------------------------------

struct MakeCorpusArgs {
  MotifCorpusConfig cfg;
  std::string out;
};

int cmd_make_corpus(const MakeCorpusArgs& a, Streams s) {
  const auto corpus = make_motif_corpus(a.cfg);
  save_corpus_dir(corpus, a.out);
  s.out << "wrote " << corpus.size() << " sequences (" << corpus.total_tokens() << " tokens) to " << a.out << "\n";
  return kExitOk;
}

int dispatch(const std::vector<std::string>& args, Streams s) {
  CLI::App app{"Relative self-attention music models: kernels, codecs, training and sampling", "relmusic"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SkewCheckArgs skew;
  auto* c_skew = app.add_subcommand("skew-check", "Verify the skew kernels against index-map oracles");
  c_skew->add_option("--max-len", skew.opt.max_len, "Largest global length L")->capture_default_str();
  c_skew->add_option("--max-block", skew.opt.max_block, "Largest local block length N")->capture_default_str();
  c_skew->add_option("--trials", skew.opt.trials, "Random instances per size")->capture_default_str();
  c_skew->add_option("--seed", skew.opt.seed, "Random seed")->capture_default_str();
  c_skew->add_flag("--inject-fault", skew.opt.inject_fault, "Corrupt the oracle index (self-test)")->group("");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench-mem", "Per-layer, per-head memory of the relative-logit paths");
  c_bench->add_option("--lengths", bench.lengths, "Sequence lengths")->delimiter(',')->capture_default_str();
  c_bench->add_option("--head-dim", bench.head_dim, "Head dimension D_h")->capture_default_str();
  c_bench->add_option("--precision", bench.precision, "f32 or f64")->capture_default_str();
  c_bench->add_option("--naive-limit-mb", bench.naive_limit_mb, "Budget for running the naive path")
      ->capture_default_str();
  c_bench->add_flag("--json", bench.json, "Print the machine-readable report instead of the table");
  c_bench->add_option("--json-out", bench.json_out, "Also write the machine-readable report to a file");
  c_bench->add_option("--seed", bench.seed, "Random seed")->capture_default_str();

  GradCheckArgs grad;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  c_grad->add_option("--config", grad.config, "Model config file (default: small two-layer model)");
  c_grad->add_option("--attention", grad.attention, "Override attention mode")
      ->check(CLI::IsMember({"global", "local"}));
  c_grad->add_option("--length", grad.length, "Sequence length")->capture_default_str();
  c_grad->add_option("--tolerance", grad.tolerance, "Maximum relative error")->capture_default_str();
  c_grad->add_option("--seed", grad.seed, "Random seed")->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a token corpus");
  c_train->add_option("--config", tr.config, "Config file (model keys plus optional \"train\" object)")->required();
  c_train->add_option("--corpus", tr.corpus, "Directory of .tok files")->required();
  c_train->add_option("--val", tr.val, "Validation corpus directory");
  c_train->add_option("--out", tr.out, "Checkpoint path")->required();
  c_train->add_option("--steps", tr.steps, "Override the configured step count");
  c_train->add_option("--log-every", tr.log_every, "Print training loss every n steps")->capture_default_str();
  auto* train_seed = c_train->add_option("--seed", tr.seed, "Override model and batch seeds");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Mean next-token NLL (nats) of a checkpoint on a corpus");
  c_eval->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  c_eval->add_option("--corpus", ev.corpus, "Directory of .tok files")->required();
  c_eval->add_option("--config", ev.config, "Require the checkpoint to match this config");
  c_eval->add_option("--length", ev.length, "Crop length (default: model max_len)");
  c_eval->add_flag("--extrapolate", ev.extrapolate, "Allow absolute positions past max_len");
  c_eval->add_option("--seed", ev.seed, "Random seed (evaluation is deterministic)")->capture_default_str();

  SampleArgs sa;
  auto* c_sample = app.add_subcommand("sample", "Generate tokens from a checkpoint");
  c_sample->add_option("--ckpt", sa.ckpt, "Checkpoint")->required();
  auto* prime_opt = c_sample->add_option("--prime", sa.prime, "Prime tokens, comma or space separated");
  c_sample->add_option("--prime-file", sa.prime_file, "Prime token file")->excludes(prime_opt);
  c_sample->add_option("--length", sa.length, "Total length including the prime (default: max_len)");
  c_sample->add_option("--temperature", sa.temperature, "Softmax temperature; 0 = argmax")->capture_default_str();
  c_sample->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  c_sample->add_option("--trace-out", sa.trace_out, "Write attention weights as JSON");
  c_sample->add_option("--out", sa.out, "Token output file ('-' = stdout)")->capture_default_str();
  c_sample->add_flag("--extrapolate", sa.extrapolate, "Allow absolute positions past max_len");

  CodecArgs enc;
  auto* c_enc = app.add_subcommand("encode", "Note list or grid to tokens");
  c_enc->add_option("--codec", enc.codec, "jsb or performance")
      ->check(CLI::IsMember({"jsb", "performance"}))
      ->capture_default_str();
  c_enc->add_option("--in", enc.in, "Input file ('-' = stdin)")->capture_default_str();
  c_enc->add_option("--out", enc.out, "Output file ('-' = stdout)")->capture_default_str();
  c_enc->add_flag("--ignore-pedal", enc.ignore_pedal, "Do not extend notes under the sustain pedal");
  c_enc->add_option("--transpose", enc.transpose, "Semitones, -3..3")->capture_default_str();
  c_enc->add_option("--stretch", enc.stretch, "Time stretch factor")->capture_default_str();
  c_enc->add_flag("--random-augment", enc.random_augment, "Draw transpose and stretch from --seed");
  c_enc->add_option("--seed", enc.seed, "Random seed")->capture_default_str();

  CodecArgs dec;
  auto* c_dec = app.add_subcommand("decode", "Tokens to note list or grid");
  c_dec->add_option("--codec", dec.codec, "jsb or performance")
      ->check(CLI::IsMember({"jsb", "performance"}))
      ->capture_default_str();
  c_dec->add_option("--in", dec.in, "Token file ('-' = stdin)")->capture_default_str();
  c_dec->add_option("--out", dec.out, "Output file ('-' = stdout)")->capture_default_str();
  c_dec->add_option("--seed", dec.seed, "Random seed (decoding is deterministic)")->capture_default_str();

  MakeCorpusArgs mk;
  auto* c_mk = app.add_subcommand("make-corpus", "Write a synthetic corpus of transposed repeating motifs");
  c_mk->add_option("--out", mk.out, "Output directory")->required();
  c_mk->add_option("--sequences", mk.cfg.sequences, "Number of sequences")->capture_default_str();
  c_mk->add_option("--length", mk.cfg.length, "Tokens per sequence")->capture_default_str();
  c_mk->add_option("--vocab", mk.cfg.vocab_size, "Vocabulary size")->capture_default_str();
  c_mk->add_option("--motif-length", mk.cfg.motif_length, "Motif period")->capture_default_str();
  c_mk->add_option("--pool", mk.cfg.motif_pool, "Number of distinct motifs")->capture_default_str();
  c_mk->add_option("--seed", mk.cfg.seed, "Random seed")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, s.out, s.err);
    return code == 0 ? kExitOk : kExitInvalid;
  }
  tr.seed_given = train_seed->count() > 0;

  if (*c_skew) return cmd_skew_check(skew, s);
  if (*c_bench) return cmd_bench_mem(bench, s);
  if (*c_grad) return cmd_gradcheck(grad, s);
  if (*c_train) return cmd_train(tr, s);
  if (*c_eval) return cmd_eval(ev, s);
  if (*c_sample) return cmd_sample(sa, s);
  if (*c_enc) return cmd_encode(enc, s);
  if (*c_dec) return cmd_decode(dec, s);
  if (*c_mk) return cmd_make_corpus(mk, s);
  return kExitInvalid;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Streams s{out, err};
  try {
    return dispatch(args, s);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const BoundsError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace relmusic::cli
