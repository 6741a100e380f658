#ifndef DUALRNN_TRAIN_HPP
#define DUALRNN_TRAIN_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "dualrnn/data.hpp"
#include "dualrnn/model.hpp"
#include "dualrnn/optim.hpp"

namespace dualrnn {

struct EvalOptions {
  int64_t seq_len = 25;
  double temperature = 1.0;
};

struct EvalResult {
  double perplexity = 0;
  double nll_sum = 0;
  int64_t tokens = 0;
};

// Static evaluation: state carried across contiguous windows, perplexity =
// exp(total NLL / token count). The id sequence is consumed as one stream.
EvalResult evaluate(Model<float>& model, const std::vector<int32_t>& ids,
                    const EvalOptions& opts);

struct DynevalOptions {
  int64_t seq_len = 25;
  double temperature = 1.0;
  double lr = 1e-5;      // 0 = score without adapting (identical to evaluate)
  double clipnorm = 0;   // 0 = off
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Score-then-adapt pass: each window contributes to perplexity with the
// current parameters, then one clipped Nadam step on that window's loss is
// taken. `warmup_ids` are adapted on without being scored. Parameters are
// restored to their entry values before returning.
EvalResult dynamic_eval(Model<float>& model, const std::vector<int32_t>& scored_ids,
                        const std::vector<int32_t>& warmup_ids, const DynevalOptions& opts);

struct TrainOptions {
  int64_t epochs = 10;
  int64_t batch_size = 32;
  int64_t seq_len = 25;
  double lr = 1e-3;
  double clipnorm = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct EpochMetrics {
  int64_t epoch = 0;
  double train_loss = 0;  // token-weighted mean of window losses (CE + L2)
  double train_ce = 0;    // cross-entropy part alone
  double valid_ppl = 0;
  double seconds = 0;
};

struct RunMetrics {
  std::vector<EpochMetrics> epochs;
  int64_t best_epoch = 0;
  double best_valid_ppl = 0;
  bool diverged = false;
  std::string divergence_message;
};

// Per epoch: iterate contiguous windows (state reset at each epoch start),
// backward, clip, Nadam step, then validate. The model is left holding the
// parameters of the epoch with the lowest validation perplexity. On
// divergence the best parameters so far are retained and `diverged` is set.
RunMetrics train_run(Model<float>& model, const std::vector<int32_t>& train_ids,
                     const std::vector<int32_t>& valid_ids, const TrainOptions& opts,
                     std::ostream* progress = nullptr);

// One line per epoch: epoch, train_loss, valid_ppl, seconds (tab-separated).
std::string format_metrics_log(const RunMetrics& metrics);

// Post-hoc tuning sweeps. Sequence length first, then softmax temperature;
// in dynamic mode also the clipping norm, with the whole procedure repeated
// for both beta1 values. Ties break toward the smaller sequence length, then
// the lower temperature.
enum class TuneMode { static_eval, dynamic };

std::vector<int64_t> tune_grid_seq_len();     // [5, 70] step 5
std::vector<double> tune_grid_temperature();  // [0.9, 1.3] step 0.05
std::vector<double> tune_grid_clipnorm();     // [0.0, 1.0] step 0.1
std::vector<double> tune_grid_beta1();        // {default 0.9, 0}

struct TuneDefaults {
  int64_t seq_len = 25;
  double temperature = 1.0;
  double clipnorm = 0;
  double beta1 = 0.9;
  double lr_eval = 1e-5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TuneResult {
  int64_t seq_len = 0;
  double temperature = 0;
  double clipnorm = 0;   // meaningful in dynamic mode only
  double beta1 = 0;      // meaningful in dynamic mode only
  double perplexity = 0;
  double default_perplexity = 0;  // at the TuneDefaults settings
  TuneMode mode = TuneMode::static_eval;
};

TuneResult tune_posthoc(Model<float>& model, const std::vector<int32_t>& valid_ids,
                        TuneMode mode, const TuneDefaults& defaults);

std::string format_tune_report(const TuneResult& r);

// ERS-vs-dual comparison over one recurrence: each architecture is trained
// on the same corpus and scored with and without dynamic evaluation.
struct CompareRow {
  std::string model_name;
  int64_t params = 0;
  double valid_ppl = 0, test_ppl = 0;
  double dyn_valid_ppl = 0, dyn_test_ppl = 0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  std::vector<std::string> warnings;
};

std::string format_report_text(const CompareReport& report);
std::string format_report_csv(const CompareReport& report);

}  // namespace dualrnn

#endif  // DUALRNN_TRAIN_HPP
