#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dualrnn/checkpoint.hpp"
#include "dualrnn/config.hpp"
#include "dualrnn/data.hpp"
#include "dualrnn/gradcheck.hpp"
#include "dualrnn/train.hpp"

namespace {

using namespace dualrnn;

constexpr double kGradCheckTol = 1e-4;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  cmd->add_option("--set", args.sets, "override a config key (repeatable)");
  cmd->add_option("--out", args.out_dir, "output directory (overrides out_dir)");
}

RunConfig effective_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = parse_config_file(args.config_path);
  for (const std::string& s : args.sets) apply_override(cfg, s);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw io_error("failed while writing '" + path + "'");
}

void echo_config(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  write_file(cfg.out_dir + "/effective_config.txt", config_echo(cfg));
}

struct EncodedCorpus {
  Vocab vocab;
  std::vector<int32_t> train, valid, test;
};

EncodedCorpus load_encoded(const RunConfig& cfg) {
  if (cfg.train_path.empty() || cfg.valid_path.empty() || cfg.test_path.empty())
    throw config_error("train_path, valid_path and test_path are required");
  Corpus corpus = load_corpus(cfg.train_path, cfg.valid_path, cfg.test_path);
  EncodedCorpus e;
  e.vocab = build_vocab(corpus.train);
  e.train = encode(e.vocab, corpus.train);
  e.valid = encode(e.vocab, corpus.valid);
  e.test = encode(e.vocab, corpus.test);
  return e;
}

int64_t resolve_vocab(RunConfig& cfg, const Vocab& vocab) {
  if (cfg.vocab_size == 0) {
    cfg.vocab_size = vocab.size();
  } else if (cfg.vocab_size != vocab.size()) {
    throw config_error("vocab_size is " + std::to_string(cfg.vocab_size) +
                       " but the training corpus yields " + std::to_string(vocab.size()) +
                       " tokens");
  }
  return cfg.vocab_size;
}

TrainOptions train_options(const RunConfig& cfg) {
  TrainOptions t;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.seq_len = cfg.seq_len;
  t.lr = cfg.lr;
  t.clipnorm = cfg.clipnorm;
  t.beta1 = cfg.beta1;
  t.beta2 = cfg.beta2;
  t.epsilon = cfg.epsilon;
  return t;
}

DynevalOptions dyneval_options(const RunConfig& cfg) {
  DynevalOptions d;
  d.seq_len = cfg.seq_len_eval;
  d.temperature = cfg.temperature;
  d.lr = cfg.lr_eval;
  d.clipnorm = cfg.clipnorm_eval;
  d.beta1 = cfg.beta1;
  d.beta2 = cfg.beta2;
  d.epsilon = cfg.epsilon;
  return d;
}

int cmd_train(const CommonArgs& args) {
  RunConfig cfg = effective_config(args);
  EncodedCorpus data = load_encoded(cfg);
  resolve_vocab(cfg, data.vocab);
  echo_config(cfg);

  Model<float> model(cfg.model());
  RunMetrics metrics = train_run(model, data.train, data.valid, train_options(cfg), &std::cerr);
  write_file(cfg.out_dir + "/metrics.tsv", format_metrics_log(metrics));
  save_checkpoint(cfg.resolved_checkpoint_path(), model, cfg);
  if (metrics.diverged) {
    std::cerr << "error: " << metrics.divergence_message
              << " (best checkpoint so far retained)\n";
    return 1;
  }
  const double test_ppl =
      evaluate(model, data.test, EvalOptions{cfg.seq_len_eval, cfg.temperature}).perplexity;
  std::cout << "best_epoch " << metrics.best_epoch << "\n"
            << "valid_ppl " << metrics.best_valid_ppl << "\n"
            << "test_ppl " << test_ppl << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, bool dynamic) {
  RunConfig cfg = effective_config(args);
  EncodedCorpus data = load_encoded(cfg);
  Model<float> model = load_checkpoint(cfg.resolved_checkpoint_path());
  if (model.config().vocab_size != data.vocab.size())
    throw config_error("checkpoint vocabulary size " +
                       std::to_string(model.config().vocab_size) +
                       " does not match the corpus (" + std::to_string(data.vocab.size()) + ")");
  echo_config(cfg);

  double valid_ppl, test_ppl;
  if (dynamic) {
    const DynevalOptions d = dyneval_options(cfg);
    valid_ppl = dynamic_eval(model, data.valid, {}, d).perplexity;
    test_ppl = dynamic_eval(model, data.test, data.valid, d).perplexity;
  } else {
    const EvalOptions e{cfg.seq_len_eval, cfg.temperature};
    valid_ppl = evaluate(model, data.valid, e).perplexity;
    test_ppl = evaluate(model, data.test, e).perplexity;
  }
  std::ostringstream report;
  report << "valid_ppl " << std::setprecision(10) << valid_ppl << "\n"
         << "test_ppl " << test_ppl << "\n";
  std::cout << report.str();
  write_file(cfg.out_dir + (dynamic ? "/dyneval.txt" : "/eval.txt"), report.str());
  return 0;
}

int cmd_tune(const CommonArgs& args, bool dynamic) {
  RunConfig cfg = effective_config(args);
  EncodedCorpus data = load_encoded(cfg);
  Model<float> model = load_checkpoint(cfg.resolved_checkpoint_path());
  echo_config(cfg);

  TuneDefaults defaults;
  defaults.seq_len = cfg.seq_len_eval;
  defaults.temperature = cfg.temperature;
  defaults.clipnorm = cfg.clipnorm_eval;
  defaults.beta1 = cfg.beta1;
  defaults.lr_eval = cfg.lr_eval;
  defaults.beta2 = cfg.beta2;
  defaults.epsilon = cfg.epsilon;
  TuneResult result = tune_posthoc(model, data.valid,
                                   dynamic ? TuneMode::dynamic : TuneMode::static_eval, defaults);
  const std::string report = format_tune_report(result);
  std::cout << report;
  write_file(cfg.out_dir + "/tune.txt", report);
  return 0;
}

int cmd_gradcheck(const CommonArgs& args) {
  RunConfig cfg = effective_config(args);
  GradCheckReport report = run_gradcheck(cfg.seed ? cfg.seed : 1234);
  std::cout << format_gradcheck(report, kGradCheckTol);
  return report.pass(kGradCheckTol) ? 0 : 1;
}

int cmd_params(const CommonArgs& args) {
  RunConfig cfg = effective_config(args);
  if (cfg.vocab_size == 0)
    throw config_error("vocab_size must be set explicitly for the params command");
  std::cout << Model<float>::param_count(cfg.model()) << "\n";
  return 0;
}

int cmd_compare(const CommonArgs& args) {
  RunConfig cfg = effective_config(args);
  EncodedCorpus data = load_encoded(cfg);
  resolve_vocab(cfg, data.vocab);
  echo_config(cfg);

  CompareReport report;
  for (const char* arch : {"ers", "dual"}) {
    RunConfig variant = cfg;
    variant.architecture = arch;
    const ModelConfig mc = variant.model();
    Model<float> model(mc);
    std::cerr << "training " << arch << " " << variant.recurrence << "...\n";
    RunMetrics metrics = train_run(model, data.train, data.valid, train_options(variant));
    if (metrics.diverged)
      throw numeric_error("training the " + std::string(arch) + " variant diverged: " +
                          metrics.divergence_message);

    CompareRow row;
    row.model_name = std::string(arch == std::string("dual") ? "Dual " : "") +
                     to_string(mc.recurrence);
    row.params = Model<float>::param_count(mc);
    const EvalOptions eo{cfg.seq_len_eval, cfg.temperature};
    row.valid_ppl = evaluate(model, data.valid, eo).perplexity;
    row.test_ppl = evaluate(model, data.test, eo).perplexity;
    const DynevalOptions dyn = dyneval_options(cfg);
    row.dyn_valid_ppl = dynamic_eval(model, data.valid, {}, dyn).perplexity;
    row.dyn_test_ppl = dynamic_eval(model, data.test, data.valid, dyn).perplexity;
    if (row.dyn_valid_ppl > row.valid_ppl)
      report.warnings.push_back(row.model_name + ": dynamic evaluation did not improve the "
                                                 "validation perplexity");
    if (row.dyn_test_ppl > row.test_ppl)
      report.warnings.push_back(row.model_name + ": dynamic evaluation did not improve the "
                                                 "test perplexity");
    report.rows.push_back(row);
  }
  const std::string text = format_report_text(report);
  std::cout << text;
  write_file(cfg.out_dir + "/report.txt", text);
  write_file(cfg.out_dir + "/report.csv", format_report_csv(report));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent language modeling engine with dual skip connections"};
  app.add_flag_callback(
      "--config-keys",
      [] {
        for (const auto& doc : config_key_docs())
          std::cout << std::left << std::setw(24) << doc.key << std::setw(12)
                    << (doc.default_value.empty() ? "(unset)" : doc.default_value) << doc.doc
                    << "\n";
        throw CLI::Success{};
      },
      "list every config key with its default");
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, dyneval_args, tune_args, gradcheck_args, params_args,
      compare_args;
  bool tune_dynamic = false;

  attach_common(app.add_subcommand("train", "train a model and keep the best checkpoint"),
                train_args);
  attach_common(app.add_subcommand("eval", "static perplexity of a checkpoint"), eval_args);
  attach_common(app.add_subcommand("dyneval", "perplexity with dynamic evaluation"),
                dyneval_args);
  CLI::App* tune = app.add_subcommand("tune", "post-hoc sweeps on the validation data");
  attach_common(tune, tune_args);
  tune->add_flag("--dynamic", tune_dynamic, "tune the dynamic-evaluation settings");
  attach_common(app.add_subcommand("gradcheck", "finite-difference check of every layer"),
                gradcheck_args);
  attach_common(app.add_subcommand("params", "trainable parameter count of a config"),
                params_args);
  attach_common(app.add_subcommand("compare", "train and score ers vs dual variants"),
                compare_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("train")) return cmd_train(train_args);
    if (app.got_subcommand("eval")) return cmd_eval(eval_args, false);
    if (app.got_subcommand("dyneval")) return cmd_eval(dyneval_args, true);
    if (app.got_subcommand("tune")) return cmd_tune(tune_args, tune_dynamic);
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck(gradcheck_args);
    if (app.got_subcommand("params")) return cmd_params(params_args);
    if (app.got_subcommand("compare")) return cmd_compare(compare_args);
  } catch (const dualrnn::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
