#ifndef DUALRNN_TESTS_FD_HPP
#define DUALRNN_TESTS_FD_HPP

// Central finite-difference oracle for the unit tests. Gradients are
// estimated from forward evaluations only, so the oracle stays independent
// of the analytic backward rules it is used to check.

#include <functional>
#include <vector>

#include "dualrnn/graph.hpp"

namespace testutil {

using dualrnn::Graph;
using dualrnn::Shape;
using dualrnn::Tensor;
using Build =
    std::function<Graph<double>::Id(Graph<double>&, const std::vector<Graph<double>::Id>&)>;

inline double eval_scalar(const std::vector<Tensor<double>>& leaves, const Build& build) {
  Graph<double> g;
  std::vector<Graph<double>::Id> ids;
  for (const auto& v : leaves) ids.push_back(g.leaf(v));
  return g.value(build(g, ids))[0];
}

inline std::vector<Tensor<double>> analytic_grads(const std::vector<Tensor<double>>& leaves,
                                                  const Build& build) {
  Graph<double> g;
  std::vector<Graph<double>::Id> ids;
  for (const auto& v : leaves) ids.push_back(g.leaf(v));
  g.backward(build(g, ids));
  std::vector<Tensor<double>> grads;
  for (size_t i = 0; i < leaves.size(); ++i) {
    const Tensor<double>& gr = g.grad(ids[i]);
    grads.push_back(gr.empty() ? Tensor<double>(leaves[i].shape()) : gr);
  }
  return grads;
}

inline std::vector<Tensor<double>> fd_grads(const std::vector<Tensor<double>>& leaves,
                                            const Build& build, double h = 1e-5) {
  std::vector<Tensor<double>> grads;
  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor<double> grad(leaves[li].shape());
    for (int64_t i = 0; i < leaves[li].size(); ++i) {
      std::vector<Tensor<double>> pert = leaves;
      pert[li][i] += h;
      const double up = eval_scalar(pert, build);
      pert[li][i] -= 2 * h;
      const double down = eval_scalar(pert, build);
      grad[i] = (up - down) / (2 * h);
    }
    grads.push_back(std::move(grad));
  }
  return grads;
}

inline double max_rel_err(const std::vector<Tensor<double>>& leaves, const Build& build,
                          double h = 1e-5, double floor = 1e-6) {
  const auto an = analytic_grads(leaves, build);
  const auto fd = fd_grads(leaves, build, h);
  double worst = 0;
  for (size_t li = 0; li < leaves.size(); ++li)
    for (int64_t i = 0; i < an[li].size(); ++i) {
      const double denom = std::max({floor, std::abs(an[li][i]), std::abs(fd[li][i])});
      worst = std::max(worst, std::abs(an[li][i] - fd[li][i]) / denom);
    }
  return worst;
}

}  // namespace testutil

#endif  // DUALRNN_TESTS_FD_HPP
