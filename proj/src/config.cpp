#include "dualrnn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace dualrnn {

namespace {

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  const char* doc;
};

int64_t parse_int(const std::string& key, const std::string& raw) {
  try {
    size_t used = 0;
    const int64_t v = std::stoll(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw config_error("key '" + key + "' expects an integer, got '" + raw + "'");
  }
}

uint64_t parse_uint(const std::string& key, const std::string& raw) {
  try {
    size_t used = 0;
    const uint64_t v = std::stoull(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw config_error("key '" + key + "' expects a non-negative integer, got '" + raw + "'");
  }
}

double parse_real(const std::string& key, const std::string& raw) {
  try {
    size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw config_error("key '" + key + "' expects a number, got '" + raw + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& raw) {
  if (raw == "1" || raw == "true" || raw == "yes") return true;
  if (raw == "0" || raw == "false" || raw == "no") return false;
  throw config_error("key '" + key + "' expects a boolean (0/1), got '" + raw + "'");
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

#define INT_FIELD(name, doc)                                            \
  Field {                                                               \
    #name, [](RunConfig& c, const std::string& v) { c.name = parse_int(#name, v); },  \
        [](const RunConfig& c) { return std::to_string(c.name); }, doc  \
  }
#define REAL_FIELD(name, doc)                                           \
  Field {                                                               \
    #name, [](RunConfig& c, const std::string& v) { c.name = parse_real(#name, v); }, \
        [](const RunConfig& c) { return fmt_real(c.name); }, doc        \
  }
#define BOOL_FIELD(name, doc)                                           \
  Field {                                                               \
    #name, [](RunConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }, \
        [](const RunConfig& c) { return c.name ? std::string("1") : std::string("0"); }, doc \
  }
#define STR_FIELD(name, doc)                                            \
  Field {                                                               \
    #name, [](RunConfig& c, const std::string& v) { c.name = v; },      \
        [](const RunConfig& c) { return c.name; }, doc                  \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      Field{"architecture",
            [](RunConfig& c, const std::string& v) {
              arch_from_string(v);
              c.architecture = v;
            },
            [](const RunConfig& c) { return c.architecture; }, "ers | dual"},
      Field{"recurrence",
            [](RunConfig& c, const std::string& v) {
              reckind_from_string(v);
              c.recurrence = v;
            },
            [](const RunConfig& c) { return c.recurrence; }, "lstm | dlstm | mdlstm"},
      INT_FIELD(vocab_size, "vocabulary size; 0 derives it from the training corpus"),
      INT_FIELD(embedding_units, "size of the embedding layer"),
      INT_FIELD(recurrent_units, "size of the recurrent layers"),
      INT_FIELD(lstm_layers, "number of recurrent layers; 0 = 1 for lstm, 2 otherwise"),
      INT_FIELD(dual_units, "size of the dual layer"),
      BOOL_FIELD(tie_weights, "couple the embedding and output matrices"),
      INT_FIELD(mogrifier_rounds, "mogrifier rounds (mdlstm only)"),
      INT_FIELD(mogrifier_rank, "mogrifier weight factorization rank; 0 = full matrices"),
      BOOL_FIELD(mogrifier_bias, "add a bias to each mogrifier round"),
      REAL_FIELD(dropout_rec_input, "dropout before the first recurrent layer"),
      REAL_FIELD(dropout_rec, "dropout for the linear transformation of the recurrent state"),
      REAL_FIELD(dropout_rec_internal, "dropout between the recurrent layers"),
      REAL_FIELD(dropout_rec_output, "dropout after the last recurrent layer"),
      REAL_FIELD(dropout_dual_input, "dropout before the dual layer"),
      REAL_FIELD(dropout_dual_output, "dropout after the dual layer"),
      REAL_FIELD(dropout_mogrifier, "dropout inside the mogrifier rounds"),
      REAL_FIELD(l2_embedding, "L2 on the embedding and output matrices"),
      REAL_FIELD(l2_rec_input, "L2 on the input weights of the recurrent layers"),
      REAL_FIELD(l2_rec, "L2 on the recurrent weights of the recurrent layers"),
      REAL_FIELD(l2_activation, "L2 on the recurrent module output activations"),
      REAL_FIELD(l2_dual, "L2 on the dual layer weights"),
      REAL_FIELD(l2_mogrifier, "L2 on the mogrifier weights"),
      STR_FIELD(train_path, "training corpus (required for corpus commands)"),
      STR_FIELD(valid_path, "validation corpus (required for corpus commands)"),
      STR_FIELD(test_path, "test corpus (required for corpus commands)"),
      STR_FIELD(checkpoint_path, "checkpoint file; empty = <out_dir>/model.ckpt"),
      INT_FIELD(epochs, "number of training epochs"),
      INT_FIELD(batch_size, "training batch size"),
      INT_FIELD(seq_len, "training sequence length"),
      REAL_FIELD(lr, "learning rate"),
      REAL_FIELD(clipnorm, "training gradient clipping norm; 0 = off"),
      REAL_FIELD(lr_eval, "learning rate for dynamic evaluation"),
      REAL_FIELD(clipnorm_eval, "gradient clipping norm for dynamic evaluation; 0 = off"),
      INT_FIELD(seq_len_eval, "sequence length for evaluation"),
      REAL_FIELD(temperature, "softmax temperature at evaluation"),
      REAL_FIELD(beta1, "Nadam first-moment decay"),
      REAL_FIELD(beta2, "Nadam second-moment decay"),
      REAL_FIELD(epsilon, "Nadam denominator epsilon"),
      Field{"seed",
            [](RunConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); },
            "seed for all randomness"},
      STR_FIELD(out_dir, "output directory for artifacts"),
  };
  return f;
}

#undef INT_FIELD
#undef REAL_FIELD
#undef BOOL_FIELD
#undef STR_FIELD

const Field& find_field(const std::string& key) {
  for (const Field& f : fields())
    if (key == f.key) return f;
  throw config_error("unknown key '" + key + "'");
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.architecture = arch_from_string(architecture);
  m.recurrence = reckind_from_string(recurrence);
  m.vocab_size = vocab_size;
  m.embedding_units = embedding_units;
  m.recurrent_units = recurrent_units;
  m.lstm_layers = static_cast<int>(lstm_layers);
  m.dual_units = dual_units;
  m.tie_weights = tie_weights;
  m.mogrifier_rounds = static_cast<int>(mogrifier_rounds);
  m.mogrifier_rank = mogrifier_rank;
  m.mogrifier_bias = mogrifier_bias;
  m.dropout.rec_input = dropout_rec_input;
  m.dropout.rec = dropout_rec;
  m.dropout.rec_internal = dropout_rec_internal;
  m.dropout.rec_output = dropout_rec_output;
  m.dropout.dual_input = dropout_dual_input;
  m.dropout.dual_output = dropout_dual_output;
  m.dropout.mogrifier = dropout_mogrifier;
  m.l2.embedding = l2_embedding;
  m.l2.rec_input = l2_rec_input;
  m.l2.rec = l2_rec;
  m.l2.activation = l2_activation;
  m.l2.dual = l2_dual;
  m.l2.mogrifier = l2_mogrifier;
  m.seed = seed;
  return m;
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(lineno) + " is not key=value: '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    find_field(key).set(base, value);
  }
  return base;
}

RunConfig parse_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), std::move(base));
}

void apply_override(RunConfig& cfg, const std::string& key_eq_value) {
  const size_t eq = key_eq_value.find('=');
  if (eq == std::string::npos)
    throw config_error("override must be key=value, got '" + key_eq_value + "'");
  find_field(trim(key_eq_value.substr(0, eq)))
      .set(cfg, trim(key_eq_value.substr(eq + 1)));
}

std::string config_echo(const RunConfig& cfg) {
  std::ostringstream os;
  for (const Field& f : fields()) os << f.key << " = " << f.get(cfg) << "\n";
  return os.str();
}

std::vector<ConfigKeyDoc> config_key_docs() {
  std::vector<ConfigKeyDoc> docs;
  const RunConfig defaults;
  for (const Field& f : fields()) docs.push_back({f.key, f.get(defaults), f.doc});
  return docs;
}

}  // namespace dualrnn
