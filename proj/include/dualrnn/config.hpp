#ifndef DUALRNN_CONFIG_HPP
#define DUALRNN_CONFIG_HPP

#include <string>
#include <vector>

#include "dualrnn/model.hpp"

namespace dualrnn {

// Flat key=value run configuration. Every key has a documented default
// except the corpus paths; unknown keys are rejected.
struct RunConfig {
  // architecture
  std::string architecture = "dual";
  std::string recurrence = "lstm";
  int64_t vocab_size = 0;  // 0 = derive from the training corpus
  int64_t embedding_units = 128;
  int64_t recurrent_units = 128;
  int64_t lstm_layers = 0;  // 0 = derived from recurrence
  int64_t dual_units = 128;
  bool tie_weights = true;
  int64_t mogrifier_rounds = 0;
  int64_t mogrifier_rank = 0;
  bool mogrifier_bias = true;

  // dropout sites
  double dropout_rec_input = 0, dropout_rec = 0, dropout_rec_internal = 0,
         dropout_rec_output = 0, dropout_dual_input = 0, dropout_dual_output = 0,
         dropout_mogrifier = 0;

  // L2 sites
  double l2_embedding = 0, l2_rec_input = 0, l2_rec = 0, l2_activation = 0, l2_dual = 0,
         l2_mogrifier = 0;

  // run inputs
  std::string train_path, valid_path, test_path;
  std::string checkpoint_path;  // empty = <out_dir>/model.ckpt
  int64_t epochs = 10;
  int64_t batch_size = 32;
  int64_t seq_len = 25;
  double lr = 1e-3;
  double clipnorm = 0;  // 0 = off
  double lr_eval = 1e-5;
  double clipnorm_eval = 0;
  int64_t seq_len_eval = 25;
  double temperature = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  uint64_t seed = 0;
  std::string out_dir = "out";

  ModelConfig model() const;
  std::string resolved_checkpoint_path() const {
    return checkpoint_path.empty() ? out_dir + "/model.ckpt" : checkpoint_path;
  }
};

// One key per line, `key = value`, '#' starts a comment.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig parse_config_file(const std::string& path, RunConfig base = {});
void apply_override(RunConfig& cfg, const std::string& key_eq_value);

// Effective key=value document, declaration order, suitable for echoing into
// the output directory and into checkpoints.
std::string config_echo(const RunConfig& cfg);

// key / default / description triples for --help style listings.
struct ConfigKeyDoc {
  std::string key, default_value, doc;
};
std::vector<ConfigKeyDoc> config_key_docs();

}  // namespace dualrnn

#endif  // DUALRNN_CONFIG_HPP
