#include "dualrnn/train.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace dualrnn {

namespace {

// Shared scored pass so that dynamic evaluation with lr = 0 is the static
// evaluation, accumulator and all.
EvalResult scored_pass(Model<float>& model, const std::vector<int32_t>& ids,
                       int64_t seq_len, double temperature, bool adapt,
                       Nadam<float>* opt, double clipnorm, bool score) {
  BatchStream stream(ids, 1);
  RecurrentState<float> state = model.initial_state(1);
  EvalResult res;
  TokenMatrix x, y;
  while (stream.next(seq_len, x, y)) {
    RecurrentState<float> window_entry = state;
    model.window_nll(x, y, state, static_cast<float>(temperature), res.nll_sum);
    res.tokens += x.batch * x.steps;
    if (adapt) {
      model.backward_window(x, y, window_entry, Mode::eval,
                            static_cast<float>(temperature));
      clip_global_norm(model.params(), static_cast<float>(clipnorm));
      opt->step(model.params());
    }
  }
  if (!score) return res;
  if (res.tokens == 0) throw error("data", "no tokens to evaluate");
  res.perplexity = std::exp(res.nll_sum / static_cast<double>(res.tokens));
  return res;
}

}  // namespace

EvalResult evaluate(Model<float>& model, const std::vector<int32_t>& ids,
                    const EvalOptions& opts) {
  return scored_pass(model, ids, opts.seq_len, opts.temperature, false, nullptr, 0, true);
}

EvalResult dynamic_eval(Model<float>& model, const std::vector<int32_t>& scored_ids,
                        const std::vector<int32_t>& warmup_ids, const DynevalOptions& opts) {
  if (opts.lr == 0.0)
    return scored_pass(model, scored_ids, opts.seq_len, opts.temperature, false, nullptr, 0,
                       true);
  const std::vector<float> snapshot = model.params().snapshot_values();
  EvalResult res;
  try {
    NadamConfig<float> ncfg;
    ncfg.lr = static_cast<float>(opts.lr);
    ncfg.beta1 = static_cast<float>(opts.beta1);
    ncfg.beta2 = static_cast<float>(opts.beta2);
    ncfg.eps = static_cast<float>(opts.epsilon);
    Nadam<float> opt(ncfg);
    if (!warmup_ids.empty())
      scored_pass(model, warmup_ids, opts.seq_len, opts.temperature, true, &opt,
                  opts.clipnorm, false);
    res = scored_pass(model, scored_ids, opts.seq_len, opts.temperature, true, &opt,
                      opts.clipnorm, true);
  } catch (...) {
    model.params().restore_values(snapshot);
    throw;
  }
  model.params().restore_values(snapshot);
  return res;
}

RunMetrics train_run(Model<float>& model, const std::vector<int32_t>& train_ids,
                     const std::vector<int32_t>& valid_ids, const TrainOptions& opts,
                     std::ostream* progress) {
  RunMetrics metrics;
  metrics.best_valid_ppl = std::numeric_limits<double>::infinity();
  NadamConfig<float> ncfg;
  ncfg.lr = static_cast<float>(opts.lr);
  ncfg.beta1 = static_cast<float>(opts.beta1);
  ncfg.beta2 = static_cast<float>(opts.beta2);
  ncfg.eps = static_cast<float>(opts.epsilon);
  Nadam<float> opt(ncfg);
  BatchStream stream(train_ids, opts.batch_size);
  std::vector<float> best = model.params().snapshot_values();

  for (int64_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    stream.reset();
    RecurrentState<float> state = model.initial_state(opts.batch_size);
    double loss_sum = 0, ce_sum = 0;
    int64_t tokens = 0;
    TokenMatrix x, y;
    try {
      while (stream.next(opts.seq_len, x, y)) {
        auto res = model.backward_window(x, y, state);
        clip_global_norm(model.params(), static_cast<float>(opts.clipnorm));
        opt.step(model.params());
        loss_sum += static_cast<double>(res.loss) * static_cast<double>(res.tokens);
        ce_sum += static_cast<double>(res.ce) * static_cast<double>(res.tokens);
        tokens += res.tokens;
      }
    } catch (const numeric_error& e) {
      model.params().restore_values(best);
      metrics.diverged = true;
      metrics.divergence_message = e.what();
      return metrics;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(tokens);
    em.train_ce = ce_sum / static_cast<double>(tokens);
    em.valid_ppl = evaluate(model, valid_ids, EvalOptions{opts.seq_len, 1.0}).perplexity;
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    metrics.epochs.push_back(em);
    if (em.valid_ppl < metrics.best_valid_ppl) {
      metrics.best_valid_ppl = em.valid_ppl;
      metrics.best_epoch = epoch;
      best = model.params().snapshot_values();
    }
    if (progress)
      (*progress) << "epoch " << epoch << "  train_loss " << em.train_loss << "  valid_ppl "
                  << em.valid_ppl << "\n";
  }
  model.params().restore_values(best);
  return metrics;
}

std::string format_metrics_log(const RunMetrics& metrics) {
  std::ostringstream os;
  os << std::fixed;
  for (const EpochMetrics& e : metrics.epochs)
    os << e.epoch << '\t' << std::setprecision(6) << e.train_loss << '\t' << e.valid_ppl << '\t'
       << std::setprecision(3) << e.seconds << '\n';
  return os.str();
}

std::vector<int64_t> tune_grid_seq_len() {
  std::vector<int64_t> g;
  for (int64_t t = 5; t <= 70; t += 5) g.push_back(t);
  return g;
}

std::vector<double> tune_grid_temperature() {
  std::vector<double> g;
  for (int k = 0; k <= 8; ++k) g.push_back(0.9 + 0.05 * k);
  return g;
}

std::vector<double> tune_grid_clipnorm() {
  std::vector<double> g;
  for (int k = 0; k <= 10; ++k) g.push_back(0.1 * k);
  return g;
}

std::vector<double> tune_grid_beta1() { return {0.9, 0.0}; }

namespace {

double tune_point(Model<float>& model, const std::vector<int32_t>& valid_ids, TuneMode mode,
                  const TuneDefaults& defaults, int64_t seq_len, double temperature,
                  double clipnorm, double beta1) {
  if (mode == TuneMode::static_eval)
    return evaluate(model, valid_ids, EvalOptions{seq_len, temperature}).perplexity;
  DynevalOptions d;
  d.seq_len = seq_len;
  d.temperature = temperature;
  d.lr = defaults.lr_eval;
  d.clipnorm = clipnorm;
  d.beta1 = beta1;
  d.beta2 = defaults.beta2;
  d.epsilon = defaults.epsilon;
  return dynamic_eval(model, valid_ids, {}, d).perplexity;
}

}  // namespace

TuneResult tune_posthoc(Model<float>& model, const std::vector<int32_t>& valid_ids,
                        TuneMode mode, const TuneDefaults& defaults) {
  TuneResult best;
  best.mode = mode;
  best.perplexity = std::numeric_limits<double>::infinity();
  best.default_perplexity = tune_point(model, valid_ids, mode, defaults, defaults.seq_len,
                                       defaults.temperature, defaults.clipnorm, defaults.beta1);

  const std::vector<double> beta1_values =
      mode == TuneMode::dynamic ? tune_grid_beta1() : std::vector<double>{defaults.beta1};
  for (double beta1 : beta1_values) {
    // sequence length at the untuned temperature
    int64_t best_T = 0;
    double best_T_ppl = std::numeric_limits<double>::infinity();
    for (int64_t T : tune_grid_seq_len()) {
      const double p =
          tune_point(model, valid_ids, mode, defaults, T, 1.0, defaults.clipnorm, beta1);
      if (p < best_T_ppl) {
        best_T_ppl = p;
        best_T = T;
      }
    }
    // temperature at the chosen length
    double best_temp = 0, best_temp_ppl = std::numeric_limits<double>::infinity();
    for (double temp : tune_grid_temperature()) {
      const double p =
          tune_point(model, valid_ids, mode, defaults, best_T, temp, defaults.clipnorm, beta1);
      if (p < best_temp_ppl) {
        best_temp_ppl = p;
        best_temp = temp;
      }
    }
    // clipping norm, dynamic mode only
    double best_clip = defaults.clipnorm, best_ppl = best_temp_ppl;
    if (mode == TuneMode::dynamic) {
      best_ppl = std::numeric_limits<double>::infinity();
      for (double clip : tune_grid_clipnorm()) {
        const double p = tune_point(model, valid_ids, mode, defaults, best_T, best_temp, clip,
                                    beta1);
        if (p < best_ppl) {
          best_ppl = p;
          best_clip = clip;
        }
      }
    }
    if (best_ppl < best.perplexity) {
      best.perplexity = best_ppl;
      best.seq_len = best_T;
      best.temperature = best_temp;
      best.clipnorm = best_clip;
      best.beta1 = beta1;
    }
  }

  if (best.default_perplexity < best.perplexity) {
    best.perplexity = best.default_perplexity;
    best.seq_len = defaults.seq_len;
    best.temperature = defaults.temperature;
    best.clipnorm = defaults.clipnorm;
    best.beta1 = defaults.beta1;
  }
  return best;
}

std::string format_tune_report(const TuneResult& r) {
  std::ostringstream os;
  os << "mode: " << (r.mode == TuneMode::dynamic ? "dynamic" : "static") << "\n"
     << "best_seq_len: " << r.seq_len << "\n"
     << "best_temperature: " << r.temperature << "\n";
  if (r.mode == TuneMode::dynamic)
    os << "best_clipnorm: " << r.clipnorm << "\n"
       << "best_beta1: " << r.beta1 << "\n";
  os << "best_perplexity: " << std::setprecision(10) << r.perplexity << "\n"
     << "default_perplexity: " << r.default_perplexity << "\n";
  return os.str();
}

namespace {

std::string human_params(int64_t n) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  if (n >= 1000000)
    os << static_cast<double>(n) / 1e6 << " M";
  else if (n >= 1000)
    os << static_cast<double>(n) / 1e3 << " K";
  else
    os << n;
  return os.str();
}

}  // namespace

std::string format_report_text(const CompareReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "MODEL" << std::right << std::setw(12) << "PARAMS"
     << std::setw(12) << "Val." << std::setw(12) << "Test" << std::setw(12) << "DynVal."
     << std::setw(12) << "DynTest" << "\n";
  os << std::fixed << std::setprecision(3);
  for (const CompareRow& r : report.rows)
    os << std::left << std::setw(16) << r.model_name << std::right << std::setw(12)
       << human_params(r.params) << std::setw(12) << r.valid_ppl << std::setw(12) << r.test_ppl
       << std::setw(12) << r.dyn_valid_ppl << std::setw(12) << r.dyn_test_ppl << "\n";
  for (const std::string& w : report.warnings) os << "warning: " << w << "\n";
  return os.str();
}

std::string format_report_csv(const CompareReport& report) {
  std::ostringstream os;
  os << "model,params,valid_ppl,test_ppl,dyn_valid_ppl,dyn_test_ppl\n";
  os << std::setprecision(10);
  for (const CompareRow& r : report.rows)
    os << r.model_name << ',' << r.params << ',' << r.valid_ppl << ',' << r.test_ppl << ','
       << r.dyn_valid_ppl << ',' << r.dyn_test_ppl << "\n";
  return os.str();
}

}  // namespace dualrnn
