#ifndef DUALRNN_MODEL_HPP
#define DUALRNN_MODEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dualrnn/layers.hpp"

namespace dualrnn {

enum class Arch { ERS, Dual };
enum class RecKind { LSTM, DLSTM, MDLSTM };
enum class Mode { train, eval };

inline const char* to_string(Arch a) { return a == Arch::ERS ? "ers" : "dual"; }
inline const char* to_string(RecKind k) {
  switch (k) {
    case RecKind::LSTM: return "lstm";
    case RecKind::DLSTM: return "dlstm";
    default: return "mdlstm";
  }
}
inline Arch arch_from_string(const std::string& s) {
  if (s == "ers") return Arch::ERS;
  if (s == "dual") return Arch::Dual;
  throw config_error("architecture must be 'ers' or 'dual', got '" + s + "'");
}
inline RecKind reckind_from_string(const std::string& s) {
  if (s == "lstm") return RecKind::LSTM;
  if (s == "dlstm") return RecKind::DLSTM;
  if (s == "mdlstm") return RecKind::MDLSTM;
  throw config_error("recurrence must be 'lstm', 'dlstm' or 'mdlstm', got '" + s + "'");
}

// Every architecture and regularization hyperparameter of the engine.
struct ModelConfig {
  Arch architecture = Arch::Dual;
  RecKind recurrence = RecKind::LSTM;
  int64_t vocab_size = 0;
  int64_t embedding_units = 0;
  int64_t recurrent_units = 0;
  int lstm_layers = 0;  // 0 = derived from the recurrence kind
  int64_t dual_units = 0;
  bool tie_weights = true;
  int mogrifier_rounds = 0;
  int64_t mogrifier_rank = 0;
  bool mogrifier_bias = true;

  struct Dropout {
    double rec_input = 0, rec = 0, rec_internal = 0, rec_output = 0;
    double dual_input = 0, dual_output = 0, mogrifier = 0;
  } dropout;

  struct L2 {
    double embedding = 0, rec_input = 0, rec = 0, activation = 0, dual = 0, mogrifier = 0;
  } l2;

  uint64_t seed = 0;

  int layers() const {
    if (lstm_layers > 0) return lstm_layers;
    return recurrence == RecKind::LSTM ? 1 : 2;
  }
  bool mogrified() const { return recurrence == RecKind::MDLSTM && mogrifier_rounds > 0; }

  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw config_error(field + " " + why);
    };
    if (vocab_size < 2) fail("vocab_size", "must be at least 2, got " + std::to_string(vocab_size));
    if (embedding_units < 1) fail("embedding_units", "must be positive");
    if (recurrent_units < 1) fail("recurrent_units", "must be positive");
    if (architecture == Arch::Dual && dual_units < 1)
      fail("dual_units", "must be positive for the dual architecture");
    const int L = layers();
    if (recurrence == RecKind::LSTM && L != 1)
      fail("lstm_layers", "must be 1 for the lstm recurrence, got " + std::to_string(L));
    if (recurrence != RecKind::LSTM && (L < 2 || L > 3))
      fail("lstm_layers", "must be 2 or 3 for stacked recurrences, got " + std::to_string(L));
    if (mogrifier_rounds < 0) fail("mogrifier_rounds", "must be non-negative");
    if (mogrifier_rank < 0) fail("mogrifier_rank", "must be non-negative");
    if (mogrified() && embedding_units != recurrent_units)
      fail("mogrifier_rounds",
           "> 0 requires embedding_units == recurrent_units (the rounds gate between the two "
           "spaces); got E=" +
               std::to_string(embedding_units) + ", H=" + std::to_string(recurrent_units));
    const std::pair<const char*, double> rates[] = {
        {"dropout_rec_input", dropout.rec_input},   {"dropout_rec", dropout.rec},
        {"dropout_rec_internal", dropout.rec_internal}, {"dropout_rec_output", dropout.rec_output},
        {"dropout_dual_input", dropout.dual_input}, {"dropout_dual_output", dropout.dual_output},
        {"dropout_mogrifier", dropout.mogrifier}};
    for (auto& [name, r] : rates)
      if (!(r >= 0.0 && r < 1.0)) fail(name, "must lie in [0,1), got " + std::to_string(r));
    const std::pair<const char*, double> l2s[] = {
        {"l2_embedding", l2.embedding}, {"l2_rec_input", l2.rec_input}, {"l2_rec", l2.rec},
        {"l2_activation", l2.activation}, {"l2_dual", l2.dual}, {"l2_mogrifier", l2.mogrifier}};
    for (auto& [name, c] : l2s)
      if (c < 0.0) fail(name, "must be non-negative, got " + std::to_string(c));
    if (tie_weights) {
      if (architecture == Arch::Dual && dual_units != embedding_units)
        fail("tie_weights", "requires dual_units == embedding_units, got D=" +
                                std::to_string(dual_units) + ", E=" +
                                std::to_string(embedding_units));
      if (architecture == Arch::ERS && recurrent_units != embedding_units)
        fail("tie_weights", "requires recurrent_units == embedding_units, got H=" +
                                std::to_string(recurrent_units) + ", E=" +
                                std::to_string(embedding_units));
    }
  }
};

// Ordered registry of named parameters with gradient and optimizer slots.
// Tied names are aliases onto canonical storage and are never iterated or
// counted twice.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad, m, v;  // sized on first use
  };

  int add(const std::string& name, Tensor<T> value) {
    if (index_.count(name) || aliases_.count(name))
      throw config_error("duplicate parameter name '" + name + "'");
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(Entry{name, std::move(value), {}, {}, {}});
    return static_cast<int>(entries_.size() - 1);
  }

  void add_alias(const std::string& alias, const std::string& canonical) {
    if (index_.count(alias) || aliases_.count(alias))
      throw config_error("duplicate parameter name '" + alias + "'");
    aliases_[alias] = resolve(canonical);
  }

  int index_of(const std::string& name) const {
    auto a = aliases_.find(name);
    const std::string& canon = a == aliases_.end() ? name : a->second;
    auto it = index_.find(canon);
    if (it == index_.end()) throw config_error("unknown parameter '" + name + "'");
    return it->second;
  }

  bool has(const std::string& name) const {
    return index_.count(name) || aliases_.count(name);
  }
  bool is_alias(const std::string& name) const { return aliases_.count(name) > 0; }
  std::string resolve(const std::string& name) const {
    auto a = aliases_.find(name);
    return a == aliases_.end() ? name : a->second;
  }

  size_t count() const { return entries_.size(); }
  Entry& entry(int i) { return entries_[static_cast<size_t>(i)]; }
  const Entry& entry(int i) const { return entries_[static_cast<size_t>(i)]; }
  Entry& operator[](const std::string& name) { return entries_[static_cast<size_t>(index_of(name))]; }

  int64_t scalar_count() const {
    int64_t n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

  Tensor<T>& grad_of(int i) {
    Entry& e = entries_[static_cast<size_t>(i)];
    if (e.grad.empty()) e.grad = Tensor<T>(e.value.shape());
    return e.grad;
  }

  void zero_grads() {
    for (Entry& e : entries_)
      if (!e.grad.empty()) e.grad.fill(T(0));
  }

  std::vector<T> snapshot_values() const {
    std::vector<T> out;
    out.reserve(static_cast<size_t>(scalar_count()));
    for (const Entry& e : entries_)
      out.insert(out.end(), e.value.values().begin(), e.value.values().end());
    return out;
  }

  void restore_values(const std::vector<T>& snap) {
    size_t pos = 0;
    for (Entry& e : entries_) {
      std::copy_n(snap.begin() + static_cast<long>(pos),
                  static_cast<size_t>(e.value.size()), e.value.values().begin());
      pos += static_cast<size_t>(e.value.size());
    }
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, int> index_;
  std::map<std::string, std::string> aliases_;
};

// Token window, row-major [batch x steps].
struct TokenMatrix {
  int64_t batch = 0, steps = 0;
  std::vector<int32_t> ids;

  TokenMatrix() = default;
  TokenMatrix(int64_t b, int64_t t) : batch(b), steps(t), ids(static_cast<size_t>(b * t), 0) {}

  int32_t& at(int64_t b, int64_t t) { return ids[static_cast<size_t>(b * steps + t)]; }
  int32_t at(int64_t b, int64_t t) const { return ids[static_cast<size_t>(b * steps + t)]; }

  std::vector<int32_t> column(int64_t t) const {
    std::vector<int32_t> col(static_cast<size_t>(batch));
    for (int64_t b = 0; b < batch; ++b) col[static_cast<size_t>(b)] = at(b, t);
    return col;
  }
};

// Per-layer (h, c) carried across truncated-BPTT windows; values only, so the
// window boundary is also the gradient boundary.
template <typename T>
struct RecurrentState {
  std::vector<Tensor<T>> h, c;

  static RecurrentState zeros(int layers, int64_t batch, int64_t units) {
    RecurrentState s;
    for (int l = 0; l < layers; ++l) {
      s.h.push_back(Tensor<T>(Shape(batch, units)));
      s.c.push_back(Tensor<T>(Shape(batch, units)));
    }
    return s;
  }
};

// A complete ERS or dual network over one of the three recurrences.
template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.validate();
    build_params();
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  RngStream& rng() { return rng_; }

  RecurrentState<T> initial_state(int64_t batch) const {
    return RecurrentState<T>::zeros(cfg_.layers(), batch, cfg_.recurrent_units);
  }

  static int64_t param_count(const ModelConfig& cfg) {
    cfg.validate();
    const int64_t V = cfg.vocab_size, E = cfg.embedding_units, H = cfg.recurrent_units;
    int64_t n = V * E;  // embedding table
    for (int l = 0; l < cfg.layers(); ++l) {
      const int64_t in = l == 0 ? E : H;
      n += 4 * (H * in + H * H + H);
      if (cfg.mogrified()) {
        const int64_t dim = H, k = cfg.mogrifier_rank;
        for (int r = 0; r < cfg.mogrifier_rounds; ++r) {
          n += k > 0 ? 2 * dim * k : dim * dim;
          if (cfg.mogrifier_bias) n += dim;
        }
      }
    }
    if (cfg.architecture == Arch::Dual)
      n += cfg.dual_units * E + cfg.dual_units * H + cfg.dual_units;
    const int64_t width = cfg.architecture == Arch::Dual ? cfg.dual_units : H;
    if (!cfg.tie_weights) n += V * width;
    n += V;  // output bias
    return n;
  }

  // Probabilities [B x T x V] at the given temperature; state advances.
  Tensor<T> forward_window(const TokenMatrix& x, RecurrentState<T>& state, Mode mode,
                           T temperature = T(1)) {
    Graph<T> g;
    Wiring w = lease(g);
    std::vector<typename Graph<T>::Id> logits = unroll(g, w, x, state, mode);
    Tensor<T> probs(Shape(x.batch, x.steps, cfg_.vocab_size));
    for (int64_t t = 0; t < x.steps; ++t) {
      Tensor<T> p = softmax_rows(g.value(logits[static_cast<size_t>(t)]), temperature);
      for (int64_t b = 0; b < x.batch; ++b)
        for (int64_t j = 0; j < cfg_.vocab_size; ++j) probs.at(b, t, j) = p.at(b, j);
    }
    if (!probs.all_finite())
      throw numeric_error("forward produced non-finite probabilities");
    return probs;
  }

  // Per-token negative log-likelihoods accumulated into `nll_acc` in token
  // order (double precision), so the total is invariant to how a stream is
  // partitioned into windows. Eval mode: dropout inert regardless of rates.
  void window_nll(const TokenMatrix& x, const TokenMatrix& y, RecurrentState<T>& state,
                  T temperature, double& nll_acc) {
    Graph<T> g;
    Wiring w = lease(g);
    std::vector<typename Graph<T>::Id> logits = unroll(g, w, x, state, Mode::eval);
    for (int64_t t = 0; t < x.steps; ++t) {
      const Tensor<T>& z = g.value(logits[static_cast<size_t>(t)]);
      for (int64_t b = 0; b < x.batch; ++b) {
        const T* zb = z.data() + b * cfg_.vocab_size;
        T zmax = zb[0];
        for (int64_t j = 1; j < cfg_.vocab_size; ++j) zmax = std::max(zmax, zb[j]);
        double lse = 0;
        for (int64_t j = 0; j < cfg_.vocab_size; ++j)
          lse += std::exp(static_cast<double>((zb[j] - zmax) / temperature));
        nll_acc += std::log(lse) -
                   static_cast<double>((zb[y.at(b, t)] - zmax) / temperature);
      }
    }
    if (!std::isfinite(nll_acc)) throw numeric_error("evaluation NLL is not finite");
  }

  struct WindowResult {
    T loss = 0;      // cross-entropy + regularization terms
    T ce = 0;        // mean per-token cross-entropy alone
    int64_t tokens = 0;
  };

  // Loss value without gradients; the finite-difference path.
  WindowResult window_loss(const TokenMatrix& x, const TokenMatrix& y,
                           RecurrentState<T>& state, Mode mode, T temperature = T(1)) {
    Graph<T> g;
    Wiring w = lease(g);
    return build_loss(g, w, x, y, state, mode, temperature).second;
  }

  // Truncated-BPTT step: mean token cross-entropy plus configured L2 terms,
  // gradients accumulated into the store, state detached for the next window.
  WindowResult backward_window(const TokenMatrix& x, const TokenMatrix& y,
                               RecurrentState<T>& state, Mode mode = Mode::train,
                               T temperature = T(1)) {
    Graph<T> g;
    Wiring w = lease(g);
    auto [loss_id, result] = build_loss(g, w, x, y, state, mode, temperature);
    g.backward(loss_id);
    store_.zero_grads();
    for (auto& [idx, leaf] : w.leases) {
      const Tensor<T>& src = g.grad(leaf);
      if (src.empty()) continue;
      Tensor<T>& dst = store_.grad_of(idx);
      for (int64_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    return result;
  }

 private:
  // Graph leaf ids for every parameter, rebuilt each window.
  struct Wiring {
    typename Graph<T>::Id embedding = -1;
    std::vector<RecurrentLayerIds<T>> layers;
    DualHeadIds<T> dual{};
    typename Graph<T>::Id out_w = -1, out_b = -1;
    std::vector<std::pair<int, typename Graph<T>::Id>> leases;  // store index -> leaf
  };

  void build_params() {
    const int64_t V = cfg_.vocab_size, E = cfg_.embedding_units, H = cfg_.recurrent_units;
    auto uniform_fan_in = [&](Shape s, int64_t fan_in) {
      const T bound = T(1) / std::sqrt(static_cast<T>(fan_in));
      return Tensor<T>::uniform(s, -bound, bound, rng_);
    };
    store_.add("embed.W", uniform_fan_in(Shape(V, E), E));
    static const char* gate[4] = {"f", "i", "o", "z"};
    for (int l = 0; l < cfg_.layers(); ++l) {
      const std::string prefix = "rec" + std::to_string(l) + ".";
      const int64_t in = l == 0 ? E : H;
      if (cfg_.mogrified()) {
        const int64_t dim = H, k = cfg_.mogrifier_rank;
        for (int r = 1; r <= cfg_.mogrifier_rounds; ++r) {
          const std::string mp = prefix + "mog" + std::to_string(r) + ".";
          const char* base = (r % 2 == 1) ? "Q" : "R";
          if (k > 0) {
            store_.add(mp + base + "l", uniform_fan_in(Shape(dim, k), k));
            store_.add(mp + base + "r", uniform_fan_in(Shape(k, dim), dim));
          } else {
            store_.add(mp + base, uniform_fan_in(Shape(dim, dim), dim));
          }
          if (cfg_.mogrifier_bias) store_.add(mp + "b", Tensor<T>(Shape(dim)));
        }
      }
      for (int k = 0; k < 4; ++k) {
        store_.add(prefix + "W_" + gate[k] + "e", uniform_fan_in(Shape(H, in), in));
        store_.add(prefix + "W_" + gate[k] + "h", uniform_fan_in(Shape(H, H), H));
        // forget-gate bias opens the memory path at the start of training
        store_.add(prefix + "b_" + gate[k],
                   k == 0 ? Tensor<T>::full(Shape(H), T(1)) : Tensor<T>(Shape(H)));
      }
    }
    if (cfg_.architecture == Arch::Dual) {
      const int64_t D = cfg_.dual_units;
      store_.add("dual.W_de", uniform_fan_in(Shape(D, E), E));
      store_.add("dual.W_dh", uniform_fan_in(Shape(D, H), H));
      store_.add("dual.b", Tensor<T>(Shape(D)));
    }
    const int64_t width = cfg_.architecture == Arch::Dual ? cfg_.dual_units : H;
    if (cfg_.tie_weights)
      store_.add_alias("out.W", "embed.W");
    else
      store_.add("out.W", uniform_fan_in(Shape(V, width), width));
    store_.add("out.b", Tensor<T>(Shape(V)));
  }

  typename Graph<T>::Id lease_param(Graph<T>& g, Wiring& w, const std::string& name) {
    const int idx = store_.index_of(name);
    for (auto& [i, leaf] : w.leases)
      if (i == idx) return leaf;  // tied names share one leaf
    typename Graph<T>::Id leaf = g.leaf(store_.entry(idx).value);
    w.leases.emplace_back(idx, leaf);
    return leaf;
  }

  Wiring lease(Graph<T>& g) {
    Wiring w;
    w.embedding = lease_param(g, w, "embed.W");
    static const char* gate[4] = {"f", "i", "o", "z"};
    for (int l = 0; l < cfg_.layers(); ++l) {
      const std::string prefix = "rec" + std::to_string(l) + ".";
      RecurrentLayerIds<T> layer;
      if (cfg_.mogrified()) {
        for (int r = 1; r <= cfg_.mogrifier_rounds; ++r) {
          const std::string mp = prefix + "mog" + std::to_string(r) + ".";
          const char* base = (r % 2 == 1) ? "Q" : "R";
          MogrifierRoundIds<T> round;
          if (cfg_.mogrifier_rank > 0) {
            round.factorized = true;
            round.w_l = lease_param(g, w, mp + base + "l");
            round.w_r = lease_param(g, w, mp + base + "r");
          } else {
            round.w = lease_param(g, w, mp + base);
          }
          if (cfg_.mogrifier_bias) round.bias = lease_param(g, w, mp + "b");
          layer.mogrifier.push_back(round);
        }
      }
      for (int k = 0; k < 4; ++k) {
        layer.lstm.w_e[k] = lease_param(g, w, prefix + "W_" + gate[k] + "e");
        layer.lstm.w_h[k] = lease_param(g, w, prefix + "W_" + gate[k] + "h");
        layer.lstm.b[k] = lease_param(g, w, prefix + "b_" + gate[k]);
      }
      w.layers.push_back(std::move(layer));
    }
    if (cfg_.architecture == Arch::Dual) {
      w.dual.w_de = lease_param(g, w, "dual.W_de");
      w.dual.w_dh = lease_param(g, w, "dual.W_dh");
      w.dual.b = lease_param(g, w, "dual.b");
    }
    w.out_w = lease_param(g, w, "out.W");
    w.out_b = lease_param(g, w, "out.b");
    return w;
  }

  Tensor<T> maybe_mask(Shape s, double rate, Mode mode) {
    if (mode != Mode::train || rate <= 0.0) return Tensor<T>();
    return dropout_mask<T>(s, static_cast<T>(rate), rng_);
  }

  // Unrolls the window and returns one logits node per timestep. Activation
  // penalties are appended to `l2_parts` when requested.
  std::vector<typename Graph<T>::Id> unroll(Graph<T>& g, Wiring& w, const TokenMatrix& x,
                                            RecurrentState<T>& state, Mode mode,
                                            std::vector<typename Graph<T>::Id>* l2_parts = nullptr,
                                            int64_t total_tokens = 0) {
    const int64_t B = x.batch, H = cfg_.recurrent_units, E = cfg_.embedding_units;
    if (x.steps < 1 || B < 1)
      throw shape_error("window must hold at least one step and one row, got [" +
                        std::to_string(B) + "x" + std::to_string(x.steps) + "]");
    if (static_cast<int>(state.h.size()) != cfg_.layers())
      throw shape_error("state has " + std::to_string(state.h.size()) + " layers, model has " +
                        std::to_string(cfg_.layers()));
    for (int l = 0; l < cfg_.layers(); ++l)
      if (state.h[static_cast<size_t>(l)].shape() != Shape(B, H))
        throw shape_error("state layer " + std::to_string(l) + " is " +
                          state.h[static_cast<size_t>(l)].shape().str() + ", expected " +
                          Shape(B, H).str());

    StepState<T> nodes;
    for (int l = 0; l < cfg_.layers(); ++l) {
      nodes.h.push_back(g.leaf(state.h[static_cast<size_t>(l)]));
      nodes.c.push_back(g.leaf(state.c[static_cast<size_t>(l)]));
    }

    // Variational mask for the recurrent-state path: one draw per window.
    std::vector<Tensor<T>> state_masks;
    if (mode == Mode::train && cfg_.dropout.rec > 0.0)
      for (int l = 0; l < cfg_.layers(); ++l)
        state_masks.push_back(dropout_mask<T>(Shape(B, H), static_cast<T>(cfg_.dropout.rec), rng_));

    std::vector<typename Graph<T>::Id> logits;
    for (int64_t t = 0; t < x.steps; ++t) {
      typename Graph<T>::Id e = embed(g, w.embedding, x.column(t));

      StepMasks<T> masks;
      masks.input = maybe_mask(Shape(B, E), cfg_.dropout.rec_input, mode);
      masks.state = state_masks;
      if (mode == Mode::train && cfg_.dropout.rec_internal > 0.0)
        for (int l = 0; l + 1 < cfg_.layers(); ++l)
          masks.internal.push_back(
              dropout_mask<T>(Shape(B, H), static_cast<T>(cfg_.dropout.rec_internal), rng_));
      if (mode == Mode::train && cfg_.mogrified() && cfg_.dropout.mogrifier > 0.0) {
        masks.mogrifier.resize(static_cast<size_t>(cfg_.layers()));
        for (int l = 0; l < cfg_.layers(); ++l)
          for (int r = 0; r < cfg_.mogrifier_rounds; ++r)
            masks.mogrifier[static_cast<size_t>(l)].push_back(
                dropout_mask<T>(Shape(B, H), static_cast<T>(cfg_.dropout.mogrifier), rng_));
      }

      typename Graph<T>::Id h_top = recurrence_step(g, e, nodes, w.layers, masks);
      if (l2_parts && cfg_.l2.activation > 0.0)
        l2_parts->push_back(g.l2_sumsq(
            h_top, static_cast<T>(cfg_.l2.activation) / static_cast<T>(total_tokens)));

      typename Graph<T>::Id h_out = h_top;
      Tensor<T> out_mask = maybe_mask(Shape(B, H), cfg_.dropout.rec_output, mode);
      if (!out_mask.empty()) h_out = g.cmul(h_out, out_mask);

      typename Graph<T>::Id head = h_out;
      if (cfg_.architecture == Arch::Dual) {
        typename Graph<T>::Id e_in = e, h_in = h_out;
        Tensor<T> me = maybe_mask(Shape(B, E), cfg_.dropout.dual_input, mode);
        Tensor<T> mh = maybe_mask(Shape(B, H), cfg_.dropout.dual_input, mode);
        if (!me.empty()) e_in = g.cmul(e_in, me);
        if (!mh.empty()) h_in = g.cmul(h_in, mh);
        head = dual_head(g, e_in, h_in, w.dual);
        Tensor<T> md = maybe_mask(Shape(B, cfg_.dual_units), cfg_.dropout.dual_output, mode);
        if (!md.empty()) head = g.cmul(head, md);
      }
      logits.push_back(project_logits(g, head, w.out_w, w.out_b));
    }

    for (int l = 0; l < cfg_.layers(); ++l) {
      state.h[static_cast<size_t>(l)] = g.value(nodes.h[static_cast<size_t>(l)]);
      state.c[static_cast<size_t>(l)] = g.value(nodes.c[static_cast<size_t>(l)]);
    }
    return logits;
  }

  std::pair<typename Graph<T>::Id, WindowResult> build_loss(Graph<T>& g, Wiring& w,
                                                            const TokenMatrix& x,
                                                            const TokenMatrix& y,
                                                            RecurrentState<T>& state, Mode mode,
                                                            T temperature) {
    if (y.batch != x.batch || y.steps != x.steps)
      throw shape_error("targets [" + std::to_string(y.batch) + "x" + std::to_string(y.steps) +
                        "] do not match inputs [" + std::to_string(x.batch) + "x" +
                        std::to_string(x.steps) + "]");
    const int64_t total = x.batch * x.steps;
    std::vector<typename Graph<T>::Id> l2_parts;
    std::vector<typename Graph<T>::Id> logits = unroll(g, w, x, state, mode, &l2_parts, total);

    std::vector<typename Graph<T>::Id> ce_parts;
    for (int64_t t = 0; t < x.steps; ++t)
      ce_parts.push_back(g.softmax_xent(logits[static_cast<size_t>(t)], y.column(t), temperature,
                                        T(1) / static_cast<T>(total)));
    typename Graph<T>::Id ce = g.sum_scalars(ce_parts);

    add_weight_l2(g, w, l2_parts);
    typename Graph<T>::Id loss = ce;
    if (!l2_parts.empty()) {
      l2_parts.push_back(ce);
      loss = g.sum_scalars(l2_parts);
    }

    WindowResult res;
    res.ce = g.value(ce)[0];
    res.loss = g.value(loss)[0];
    res.tokens = total;
    if (!std::isfinite(static_cast<double>(res.loss)))
      throw numeric_error("window loss is not finite (training diverged)");
    return {loss, res};
  }

  void add_weight_l2(Graph<T>& g, Wiring& w, std::vector<typename Graph<T>::Id>& parts) {
    auto penalize = [&](typename Graph<T>::Id leaf, double coeff) {
      if (coeff > 0.0) parts.push_back(g.l2_sumsq(leaf, static_cast<T>(coeff)));
    };
    penalize(w.embedding, cfg_.l2.embedding);
    if (!cfg_.tie_weights && cfg_.l2.embedding > 0.0 && w.out_w != w.embedding)
      penalize(w.out_w, cfg_.l2.embedding);
    for (auto& layer : w.layers) {
      for (int k = 0; k < 4; ++k) {
        penalize(layer.lstm.w_e[k], cfg_.l2.rec_input);
        penalize(layer.lstm.w_h[k], cfg_.l2.rec);
      }
      for (auto& round : layer.mogrifier) {
        if (round.factorized) {
          penalize(round.w_l, cfg_.l2.mogrifier);
          penalize(round.w_r, cfg_.l2.mogrifier);
        } else {
          penalize(round.w, cfg_.l2.mogrifier);
        }
      }
    }
    if (cfg_.architecture == Arch::Dual) {
      penalize(w.dual.w_de, cfg_.l2.dual);
      penalize(w.dual.w_dh, cfg_.l2.dual);
    }
  }

  ModelConfig cfg_;
  ParamStore<T> store_;
  RngStream rng_;
};

}  // namespace dualrnn

#endif  // DUALRNN_MODEL_HPP
