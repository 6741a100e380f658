#ifndef DUALRNN_LAYERS_HPP
#define DUALRNN_LAYERS_HPP

#include <utility>
#include <vector>

#include "dualrnn/graph.hpp"

namespace dualrnn {

// Parameter bundles hold graph leaf ids; the model owns the backing storage
// and re-leases it into a fresh graph every window.

template <typename T>
struct LstmParamIds {
  using Id = typename Graph<T>::Id;
  // gate order: f, i, o, z
  Id w_e[4];  // [H x E_in]
  Id w_h[4];  // [H x H]
  Id b[4];    // [H]
};

template <typename T>
struct MogrifierRoundIds {
  using Id = typename Graph<T>::Id;
  bool factorized = false;
  Id w = -1;            // [dim x dim] when full
  Id w_l = -1, w_r = -1;  // [dim x k], [k x dim] when factorized
  Id bias = -1;         // [dim], -1 when biases are disabled
};

template <typename T>
struct DualHeadIds {
  using Id = typename Graph<T>::Id;
  Id w_de;  // [D x E]
  Id w_dh;  // [D x H]
  Id b;     // [D]
};

// Row lookup of the embedding table; backward touches only the used rows.
template <typename T>
typename Graph<T>::Id embed(Graph<T>& g, typename Graph<T>::Id table,
                            std::vector<int32_t> tokens) {
  return g.lookup_rows(table, std::move(tokens));
}

// f,i,o = sigmoid gates, z = tanh candidate; c = f.c_prev + i.z; h = o.tanh(c).
template <typename T>
std::pair<typename Graph<T>::Id, typename Graph<T>::Id> lstm_cell(
    Graph<T>& g, typename Graph<T>::Id e, typename Graph<T>::Id h_prev,
    typename Graph<T>::Id c_prev, const LstmParamIds<T>& p) {
  using Id = typename Graph<T>::Id;
  Id pre[4];
  for (int k = 0; k < 4; ++k)
    pre[k] = g.add(g.add(g.matmul_nt(e, p.w_e[k]), g.matmul_nt(h_prev, p.w_h[k])), p.b[k]);
  Id f = g.sigmoid(pre[0]);
  Id i = g.sigmoid(pre[1]);
  Id o = g.sigmoid(pre[2]);
  Id z = g.tanh(pre[3]);
  Id c = g.add(g.mul(f, c_prev), g.mul(i, z));
  Id h = g.mul(o, g.tanh(c));
  return {h, c};
}

// Alternating mogrifier rounds: odd rounds regate the input from the hidden
// state, even rounds regate the hidden state from the input. Zero rounds is
// the identity. `round_masks`, when non-null, holds one dropout mask per
// round applied to the vector entering that round's linear map.
template <typename T>
std::pair<typename Graph<T>::Id, typename Graph<T>::Id> mogrify(
    Graph<T>& g, typename Graph<T>::Id e, typename Graph<T>::Id h,
    const std::vector<MogrifierRoundIds<T>>& rounds,
    const std::vector<Tensor<T>>* round_masks = nullptr) {
  using Id = typename Graph<T>::Id;
  Id cur_e = e, cur_h = h;
  for (size_t r = 0; r < rounds.size(); ++r) {
    const MogrifierRoundIds<T>& p = rounds[r];
    const bool odd = (r % 2 == 0);  // round index i = r+1
    Id src = odd ? cur_h : cur_e;
    if (round_masks && !(*round_masks)[r].empty()) src = g.cmul(src, (*round_masks)[r]);
    Id lin = p.factorized ? g.matmul_nt(g.matmul_nt(src, p.w_r), p.w_l)
                          : g.matmul_nt(src, p.w);
    if (p.bias >= 0) lin = g.add(lin, p.bias);
    Id gate = g.scale(g.sigmoid(lin), T(2));
    if (odd)
      cur_e = g.mul(gate, cur_e);
    else
      cur_h = g.mul(gate, cur_h);
  }
  return {cur_e, cur_h};
}

// d = ReLU(e W_de^T + h W_dh^T + b); the skip path that joins the embedding
// and the recurrent output ahead of the softmax.
template <typename T>
typename Graph<T>::Id dual_head(Graph<T>& g, typename Graph<T>::Id e,
                                typename Graph<T>::Id h, const DualHeadIds<T>& p) {
  return g.relu(g.add(g.add(g.matmul_nt(e, p.w_de), g.matmul_nt(h, p.w_dh)), p.b));
}

// logits = x W^T + b with W: [V x width]. With weight tying, W is the same
// leaf as the embedding table, so gradients from both uses accumulate there.
template <typename T>
typename Graph<T>::Id project_logits(Graph<T>& g, typename Graph<T>::Id x,
                                     typename Graph<T>::Id w, typename Graph<T>::Id b) {
  return g.add(g.matmul_nt(x, w), b);
}

// One stacked layer: optional mogrifier in front of the cell.
template <typename T>
struct RecurrentLayerIds {
  LstmParamIds<T> lstm;
  std::vector<MogrifierRoundIds<T>> mogrifier;  // empty for plain LSTM layers
};

// Per-step dropout sites; empty tensors disable a site.
template <typename T>
struct StepMasks {
  Tensor<T> input;                                // before the first layer, per step
  std::vector<Tensor<T>> state;                   // per layer, fixed across a window
  std::vector<Tensor<T>> internal;                // between layers, per step
  std::vector<std::vector<Tensor<T>>> mogrifier;  // [layer][round], per step
};

// Graph-node (h, c) per layer inside one window.
template <typename T>
struct StepState {
  std::vector<typename Graph<T>::Id> h, c;
};

// Runs every layer for one timestep and returns the top h. The hidden state
// entering the gate path may carry a variational mask; the carried state
// itself stays unmasked.
template <typename T>
typename Graph<T>::Id recurrence_step(Graph<T>& g, typename Graph<T>::Id e,
                                      StepState<T>& state,
                                      const std::vector<RecurrentLayerIds<T>>& layers,
                                      const StepMasks<T>& masks) {
  using Id = typename Graph<T>::Id;
  if (state.h.size() != layers.size() || state.c.size() != layers.size())
    throw shape_error("recurrent state has " + std::to_string(state.h.size()) +
                      " layers, model has " + std::to_string(layers.size()));
  Id x = e;
  if (!masks.input.empty()) x = g.cmul(x, masks.input);
  for (size_t l = 0; l < layers.size(); ++l) {
    Id h_in = state.h[l];
    if (!masks.state.empty() && !masks.state[l].empty())
      h_in = g.cmul(h_in, masks.state[l]);
    Id cell_x = x, cell_h = h_in;
    if (!layers[l].mogrifier.empty()) {
      const std::vector<Tensor<T>>* mm =
          masks.mogrifier.empty() ? nullptr : &masks.mogrifier[l];
      std::tie(cell_x, cell_h) = mogrify(g, x, h_in, layers[l].mogrifier, mm);
    }
    auto [h, c] = lstm_cell(g, cell_x, cell_h, state.c[l], layers[l].lstm);
    state.h[l] = h;
    state.c[l] = c;
    x = h;
    if (l + 1 < layers.size() && !masks.internal.empty() && !masks.internal[l].empty())
      x = g.cmul(x, masks.internal[l]);
  }
  return x;
}

}  // namespace dualrnn

#endif  // DUALRNN_LAYERS_HPP
