#ifndef EDTWEETLAB_AUTOGRAD_HPP_
#define EDTWEETLAB_AUTOGRAD_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "edtweetlab/tensor.hpp"

namespace edtweetlab {

// Reverse-mode autodiff over a dynamically built tape. Every operation
// records its parents and a closure that routes the node's gradient into
// them; backward() replays the tape in reverse topological order.
namespace ag {

struct Node {
  Tensor value;
  Tensor grad;
  bool grad_alloc = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (!grad_alloc) {
      grad = Tensor(value.rows(), value.cols());
      grad_alloc = true;
    }
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

inline Var leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

inline Var constant(Tensor value) { return leaf(std::move(value), false); }

namespace detail {

inline void accum(Node& target, const Tensor& delta) {
  if (!target.requires_grad) return;
  target.ensure_grad();
  for (std::size_t i = 0; i < delta.size(); ++i) target.grad[i] += delta[i];
}

inline Var make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const Var& p : parents) {
    n->requires_grad = n->requires_grad || p.node()->requires_grad;
    n->parents.push_back(p.node());
  }
  if (n->requires_grad) n->backprop = std::move(backprop);
  return Var(std::move(n));
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  return detail::make(ten::matmul(a.value(), b.value()), {a, b}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    if (a.requires_grad) detail::accum(a, ten::matmul(self.grad, ten::transpose(b.value)));
    if (b.requires_grad) detail::accum(b, ten::matmul(ten::transpose(a.value), self.grad));
  });
}

inline Var add(const Var& a, const Var& b) {
  return detail::make(ten::add(a.value(), b.value()), {a, b}, [](Node& self) {
    detail::accum(*self.parents[0], self.grad);
    detail::accum(*self.parents[1], self.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  return detail::make(ten::sub(a.value(), b.value()), {a, b}, [](Node& self) {
    detail::accum(*self.parents[0], self.grad);
    detail::accum(*self.parents[1], ten::scale(self.grad, -1.0));
  });
}

// broadcast row-vector bias over every row of a
inline Var add_rowwise(const Var& a, const Var& bias) {
  return detail::make(ten::add_rowwise(a.value(), bias.value()), {a, bias}, [](Node& self) {
    detail::accum(*self.parents[0], self.grad);
    detail::accum(*self.parents[1], ten::col_sums(self.grad));
  });
}

inline Var hadamard(const Var& a, const Var& b) {
  return detail::make(ten::hadamard(a.value(), b.value()), {a, b}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    if (a.requires_grad) detail::accum(a, ten::hadamard(self.grad, b.value));
    if (b.requires_grad) detail::accum(b, ten::hadamard(self.grad, a.value));
  });
}

inline Var scale(const Var& a, double c) {
  return detail::make(ten::scale(a.value(), c), {a}, [c](Node& self) {
    detail::accum(*self.parents[0], ten::scale(self.grad, c));
  });
}

// multiply row i by the constant m[i]; m carries no gradient
inline Var scale_rows_const(const Var& a, Tensor m) {
  return detail::make(ten::scale_rows(a.value(), m), {a}, [m](Node& self) {
    detail::accum(*self.parents[0], ten::scale_rows(self.grad, m));
  });
}

inline Var sigmoid(const Var& a) {
  return detail::make(ten::sigmoid(a.value()), {a}, [](Node& self) {
    Tensor d = self.grad;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double s = self.value[i];
      d[i] *= s * (1.0 - s);
    }
    detail::accum(*self.parents[0], d);
  });
}

inline Var tanh_v(const Var& a) {
  return detail::make(ten::tanh(a.value()), {a}, [](Node& self) {
    Tensor d = self.grad;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double t = self.value[i];
      d[i] *= 1.0 - t * t;
    }
    detail::accum(*self.parents[0], d);
  });
}

inline Var gelu(const Var& a) {
  return detail::make(ten::gelu(a.value()), {a}, [](Node& self) {
    Node& a = *self.parents[0];
    Tensor d = self.grad;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= ten::gelu_grad_scalar(a.value[i]);
    detail::accum(a, d);
  });
}

inline Var softmax_rows(const Var& a) {
  return detail::make(ten::softmax_rows(a.value()), {a}, [](Node& self) {
    const Tensor& s = self.value;
    Tensor d(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < s.cols(); ++j) dot += self.grad.at(i, j) * s.at(i, j);
      for (std::size_t j = 0; j < s.cols(); ++j) {
        d.at(i, j) = s.at(i, j) * (self.grad.at(i, j) - dot);
      }
    }
    detail::accum(*self.parents[0], d);
  });
}

inline Var concat_cols(const Var& a, const Var& b) {
  std::size_t ac = a.value().cols();
  return detail::make(ten::concat_cols(a.value(), b.value()), {a, b}, [ac](Node& self) {
    detail::accum(*self.parents[0], ten::slice_cols(self.grad, 0, ac));
    detail::accum(*self.parents[1],
                  ten::slice_cols(self.grad, ac, self.grad.cols() - ac));
  });
}

inline Var slice_cols(const Var& a, std::size_t first, std::size_t count) {
  return detail::make(ten::slice_cols(a.value(), first, count), {a}, [first](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    Tensor d(a.value.rows(), a.value.cols());
    for (std::size_t i = 0; i < self.grad.rows(); ++i) {
      for (std::size_t j = 0; j < self.grad.cols(); ++j) {
        d.at(i, first + j) = self.grad.at(i, j);
      }
    }
    detail::accum(a, d);
  });
}

inline Var slice_rows(const Var& a, std::size_t first, std::size_t count) {
  return detail::make(ten::slice_rows(a.value(), first, count), {a}, [first](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    Tensor d(a.value.rows(), a.value.cols());
    for (std::size_t i = 0; i < self.grad.rows(); ++i) {
      for (std::size_t j = 0; j < self.grad.cols(); ++j) {
        d.at(first + i, j) = self.grad.at(i, j);
      }
    }
    detail::accum(a, d);
  });
}

inline Var transpose(const Var& a) {
  return detail::make(ten::transpose(a.value()), {a}, [](Node& self) {
    detail::accum(*self.parents[0], ten::transpose(self.grad));
  });
}

// rows of `table` selected by id; gradient scatter-adds into the table
inline Var embedding_rows(const Var& table, std::vector<std::uint32_t> ids) {
  const Tensor& tab = table.value();
  Tensor out(ids.size(), tab.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= tab.rows()) throw InvalidArgument("embedding_rows: id out of range");
    for (std::size_t j = 0; j < tab.cols(); ++j) out.at(t, j) = tab.at(ids[t], j);
  }
  return detail::make(std::move(out), {table}, [ids](Node& self) {
    Node& tab = *self.parents[0];
    if (!tab.requires_grad) return;
    tab.ensure_grad();
    for (std::size_t t = 0; t < ids.size(); ++t) {
      for (std::size_t j = 0; j < self.grad.cols(); ++j) {
        tab.grad.at(ids[t], j) += self.grad.at(t, j);
      }
    }
  });
}

inline Var sum_all(const Var& a) {
  return detail::make(Tensor::scalar(ten::sum(a.value())), {a}, [](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    double g = self.grad[0];
    Tensor d(a.value.rows(), a.value.cols(), g);
    detail::accum(a, d);
  });
}

inline constexpr double kBceClamp = 1e-7;

// Mean binary cross-entropy of probabilities p (any shape) against constant
// targets y. Probabilities are clamped to [1e-7, 1 - 1e-7] in both the loss
// and its gradient.
inline Var bce_mean(const Var& p, Tensor y) {
  ten::check_same_shape(p.value(), y, "bce_mean");
  if (y.size() == 0) throw InvalidArgument("bce_mean: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double pc = std::min(std::max(p.value()[i], kBceClamp), 1.0 - kBceClamp);
    total += -(y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc));
  }
  double inv_n = 1.0 / static_cast<double>(y.size());
  return detail::make(Tensor::scalar(total * inv_n), {p}, [y, inv_n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    double g = self.grad[0];
    Tensor d(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < y.size(); ++i) {
      double pc = std::min(std::max(p.value[i], kBceClamp), 1.0 - kBceClamp);
      d[i] = g * inv_n * (pc - y[i]) / (pc * (1.0 - pc));
    }
    detail::accum(p, d);
  });
}

// Row-wise layer normalization with learnable gain/shift (1 x cols each).
inline Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5) {
  const Tensor& xv = x.value();
  if (gamma.value().rows() != 1 || gamma.value().cols() != xv.cols() ||
      beta.value().rows() != 1 || beta.value().cols() != xv.cols()) {
    throw InvalidArgument("layer_norm: gamma/beta must be 1 x cols(x)");
  }
  std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor xhat(rows, cols);
  std::vector<double> inv_sigma(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mean += xv.at(i, j);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      double dj = xv.at(i, j) - mean;
      var += dj * dj;
    }
    var /= static_cast<double>(cols);
    inv_sigma[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) xhat.at(i, j) = (xv.at(i, j) - mean) * inv_sigma[i];
  }
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out.at(i, j) = gamma.value().at(0, j) * xhat.at(i, j) + beta.value().at(0, j);
    }
  }
  return detail::make(std::move(out), {x, gamma, beta},
                      [xhat, inv_sigma](Node& self) {
    Node& x = *self.parents[0];
    Node& gamma = *self.parents[1];
    Node& beta = *self.parents[2];
    std::size_t rows = xhat.rows(), cols = xhat.cols();
    if (gamma.requires_grad) {
      Tensor dg(1, cols);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) dg.at(0, j) += self.grad.at(i, j) * xhat.at(i, j);
      }
      detail::accum(gamma, dg);
    }
    if (beta.requires_grad) detail::accum(beta, ten::col_sums(self.grad));
    if (x.requires_grad) {
      Tensor dx(rows, cols);
      for (std::size_t i = 0; i < rows; ++i) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        std::vector<double> dxhat(cols);
        for (std::size_t j = 0; j < cols; ++j) {
          dxhat[j] = self.grad.at(i, j) * gamma.value.at(0, j);
          mean_dxhat += dxhat[j];
          mean_dxhat_xhat += dxhat[j] * xhat.at(i, j);
        }
        mean_dxhat /= static_cast<double>(cols);
        mean_dxhat_xhat /= static_cast<double>(cols);
        for (std::size_t j = 0; j < cols; ++j) {
          dx.at(i, j) =
              inv_sigma[i] * (dxhat[j] - mean_dxhat - xhat.at(i, j) * mean_dxhat_xhat);
        }
      }
      detail::accum(x, dx);
    }
  });
}

// --- backward pass -------------------------------------------------------

namespace detail {

inline std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto [n, i] = stack.back();
    if (i < n->parents.size()) {
      stack.back().second = i + 1;
      Node* p = n->parents[i].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace detail

inline void backward(const Var& loss) {
  if (!loss.defined() || loss.value().size() != 1) {
    throw InvalidArgument("backward: loss must be a defined scalar");
  }
  Node* root = loss.node().get();
  std::vector<Node*> order = detail::topo_order(root);
  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->requires_grad && n->grad_alloc) n->backprop(*n);
  }
}

}  // namespace ag

}  // namespace edtweetlab

#endif  // EDTWEETLAB_AUTOGRAD_HPP_
