#ifndef DUALRNN_GRADCHECK_HPP
#define DUALRNN_GRADCHECK_HPP

#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dualrnn/model.hpp"

namespace dualrnn {

// Central finite differences at 64-bit against the analytic backward of each
// layer op and of a full truncated-BPTT window. The difference route only
// evaluates forward passes, so it is independent of the backward rules it
// checks.

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst() const {
    double w = 0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_err);
    return w;
  }
  bool pass(double tol) const { return worst() < tol; }
};

namespace gradcheck_detail {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

using Builder = std::function<Graph<double>::Id(Graph<double>&,
                                                const std::vector<Graph<double>::Id>&)>;

// Perturbs every element of every leaf and compares the finite difference of
// the scalar loss with the analytic gradient from one backward pass.
inline double check_graph(std::vector<Tensor<double>> leaves, const Builder& build,
                          double h = 1e-5) {
  auto eval = [&](const std::vector<Tensor<double>>& vals) {
    Graph<double> g;
    std::vector<Graph<double>::Id> ids;
    for (const auto& v : vals) ids.push_back(g.leaf(v));
    return g.value(build(g, ids))[0];
  };

  Graph<double> g;
  std::vector<Graph<double>::Id> ids;
  for (const auto& v : leaves) ids.push_back(g.leaf(v));
  g.backward(build(g, ids));

  double worst = 0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    const Tensor<double>& analytic = g.grad(ids[li]);
    for (int64_t i = 0; i < leaves[li].size(); ++i) {
      std::vector<Tensor<double>> pert = leaves;
      pert[li][i] += h;
      const double up = eval(pert);
      pert[li][i] -= 2 * h;
      const double down = eval(pert);
      const double fd = (up - down) / (2 * h);
      const double an = analytic.empty() ? 0.0 : analytic[i];
      worst = std::max(worst, rel_err(an, fd));
    }
  }
  return worst;
}

inline Tensor<double> rnd(Shape s, RngStream& rng, double scale = 1.0) {
  return Tensor<double>::uniform(s, -scale, scale, rng);
}

}  // namespace gradcheck_detail

inline GradCheckReport run_gradcheck(uint64_t seed = 1234) {
  using namespace gradcheck_detail;
  using Id = Graph<double>::Id;
  RngStream rng(seed);
  GradCheckReport report;
  auto add = [&](const std::string& name, double err) {
    report.entries.push_back({name, err});
  };

  {  // matmul through a scalar reduction
    auto a = rnd(Shape(3, 4), rng), b = rnd(Shape(4, 2), rng), c = rnd(Shape(3, 2), rng);
    add("matmul", check_graph({a, b}, [&](Graph<double>& g, const std::vector<Id>& v) {
          return g.dot_const(g.matmul(v[0], v[1]), c);
        }));
  }
  {  // elementwise product
    auto a = rnd(Shape(3, 4), rng), b = rnd(Shape(3, 4), rng), c = rnd(Shape(3, 4), rng);
    add("pointwise_mul", check_graph({a, b}, [&](Graph<double>& g, const std::vector<Id>& v) {
          return g.dot_const(g.mul(v[0], v[1]), c);
        }));
  }
  {  // embedding lookup: used rows get gradient, unused rows none
    auto table = rnd(Shape(5, 3), rng);
    auto c = rnd(Shape(4, 3), rng);
    std::vector<int32_t> toks{1, 3, 1, 0};
    add("embed", check_graph({table}, [&](Graph<double>& g, const std::vector<Id>& v) {
          return g.dot_const(embed(g, v[0], toks), c);
        }));
  }
  {  // lstm cell, all parameters and inputs
    const int64_t B = 1, H = 3, E = 2;
    std::vector<Tensor<double>> leaves;
    for (int k = 0; k < 4; ++k) leaves.push_back(rnd(Shape(H, E), rng));
    for (int k = 0; k < 4; ++k) leaves.push_back(rnd(Shape(H, H), rng));
    for (int k = 0; k < 4; ++k) leaves.push_back(rnd(Shape(H), rng));
    leaves.push_back(rnd(Shape(B, E), rng));
    leaves.push_back(rnd(Shape(B, H), rng));
    leaves.push_back(rnd(Shape(B, H), rng));
    auto ch = rnd(Shape(B, H), rng), cc = rnd(Shape(B, H), rng);
    add("lstm_cell", check_graph(leaves, [&](Graph<double>& g, const std::vector<Id>& v) {
          LstmParamIds<double> p;
          for (int k = 0; k < 4; ++k) {
            p.w_e[k] = v[static_cast<size_t>(k)];
            p.w_h[k] = v[static_cast<size_t>(4 + k)];
            p.b[k] = v[static_cast<size_t>(8 + k)];
          }
          auto [hn, cn] = lstm_cell(g, v[12], v[13], v[14], p);
          return g.sum_scalars({g.dot_const(hn, ch), g.dot_const(cn, cc)});
        }));
  }
  for (int rounds : {2, 4}) {  // mogrifier, full and factorized
    const int64_t B = 2, dim = 3, k = 2;
    for (bool factorized : {false, true}) {
      std::vector<Tensor<double>> leaves;
      for (int r = 0; r < rounds; ++r) {
        if (factorized) {
          leaves.push_back(rnd(Shape(dim, k), rng));
          leaves.push_back(rnd(Shape(k, dim), rng));
        } else {
          leaves.push_back(rnd(Shape(dim, dim), rng));
        }
        leaves.push_back(rnd(Shape(dim), rng));
      }
      leaves.push_back(rnd(Shape(B, dim), rng));
      leaves.push_back(rnd(Shape(B, dim), rng));
      auto ce = rnd(Shape(B, dim), rng), chh = rnd(Shape(B, dim), rng);
      const std::string name = "mogrify_r" + std::to_string(rounds) +
                               (factorized ? "_rank" + std::to_string(k) : "_full");
      add(name, check_graph(leaves, [&](Graph<double>& g, const std::vector<Id>& v) {
            std::vector<MogrifierRoundIds<double>> rs;
            size_t i = 0;
            for (int r = 0; r < rounds; ++r) {
              MogrifierRoundIds<double> round;
              if (factorized) {
                round.factorized = true;
                round.w_l = v[i++];
                round.w_r = v[i++];
              } else {
                round.w = v[i++];
              }
              round.bias = v[i++];
              rs.push_back(round);
            }
            auto [e2, h2] = mogrify(g, v[i], v[i + 1], rs);
            return g.sum_scalars({g.dot_const(e2, ce), g.dot_const(h2, chh)});
          }));
    }
  }
  {  // dual head (gradient is zero through clipped units)
    const int64_t B = 2, E = 3, H = 4, D = 3;
    std::vector<Tensor<double>> leaves = {rnd(Shape(D, E), rng), rnd(Shape(D, H), rng),
                                          rnd(Shape(D), rng), rnd(Shape(B, E), rng),
                                          rnd(Shape(B, H), rng)};
    auto c = rnd(Shape(B, D), rng);
    add("dual_head", check_graph(leaves, [&](Graph<double>& g, const std::vector<Id>& v) {
          DualHeadIds<double> p{v[0], v[1], v[2]};
          return g.dot_const(dual_head(g, v[3], v[4], p), c);
        }));
  }
  {  // untied projection through the fused softmax cross-entropy
    const int64_t B = 3, D = 4, V = 5;
    std::vector<Tensor<double>> leaves = {rnd(Shape(B, D), rng), rnd(Shape(V, D), rng),
                                          rnd(Shape(V), rng)};
    std::vector<int32_t> targets{0, 3, 2};
    add("project_logits_untied",
        check_graph(leaves, [&](Graph<double>& g, const std::vector<Id>& v) {
          return g.softmax_xent(project_logits(g, v[0], v[1], v[2]), targets, 1.0,
                                1.0 / static_cast<double>(B));
        }));
  }
  {  // tied projection: one matrix serves lookup and projection
    const int64_t V = 5, E = 3;
    std::vector<Tensor<double>> leaves = {rnd(Shape(V, E), rng), rnd(Shape(V), rng)};
    std::vector<int32_t> toks{1, 4, 2};
    std::vector<int32_t> targets{4, 0, 1};
    add("project_logits_tied",
        check_graph(leaves, [&](Graph<double>& g, const std::vector<Id>& v) {
          Id e = embed(g, v[0], toks);
          return g.softmax_xent(project_logits(g, e, v[0], v[1]), targets, 1.0, 1.0 / 3.0);
        }));
  }
  {  // full window: dual mogrifier stack with every L2 site active
    ModelConfig cfg;
    cfg.architecture = Arch::Dual;
    cfg.recurrence = RecKind::MDLSTM;
    cfg.vocab_size = 7;
    cfg.embedding_units = cfg.recurrent_units = cfg.dual_units = 3;
    cfg.tie_weights = true;
    cfg.mogrifier_rounds = 2;
    cfg.mogrifier_rank = 0;
    cfg.l2.embedding = 1e-3;
    cfg.l2.rec_input = 1e-3;
    cfg.l2.rec = 1e-3;
    cfg.l2.activation = 1e-3;
    cfg.l2.dual = 1e-3;
    cfg.l2.mogrifier = 1e-3;
    cfg.seed = seed;
    Model<double> model(cfg);
    const int64_t B = 2, T = 4;
    TokenMatrix x(B, T), y(B, T);
    for (auto& t : x.ids) t = static_cast<int32_t>(rng.next_below(7));
    for (auto& t : y.ids) t = static_cast<int32_t>(rng.next_below(7));

    RecurrentState<double> state = model.initial_state(B);
    model.backward_window(x, y, state);

    const double h = 1e-5;
    double worst = 0;
    auto loss_at = [&](Model<double>& m) {
      RecurrentState<double> s = m.initial_state(B);
      return static_cast<double>(m.window_loss(x, y, s, Mode::train).loss);
    };
    for (size_t pi = 0; pi < model.params().count(); ++pi) {
      auto& entry = model.params().entry(static_cast<int>(pi));
      for (int64_t i = 0; i < entry.value.size(); ++i) {
        const double keep = entry.value[i];
        entry.value[i] = keep + h;
        const double up = loss_at(model);
        entry.value[i] = keep - h;
        const double down = loss_at(model);
        entry.value[i] = keep;
        const double fd = (up - down) / (2 * h);
        const double an = entry.grad.empty() ? 0.0 : entry.grad[i];
        worst = std::max(worst, rel_err(an, fd));
      }
    }
    add("backward_window_dual_mdlstm", worst);
  }
  return report;
}

inline std::string format_gradcheck(const GradCheckReport& report, double tol) {
  std::ostringstream os;
  os << std::left << std::setw(32) << "op" << std::setw(16) << "max_rel_err"
     << "status\n";
  for (const auto& e : report.entries)
    os << std::left << std::setw(32) << e.name << std::setw(16) << std::scientific
       << std::setprecision(3) << e.max_rel_err << (e.max_rel_err < tol ? "PASS" : "FAIL")
       << "\n";
  return os.str();
}

}  // namespace dualrnn

#endif  // DUALRNN_GRADCHECK_HPP
