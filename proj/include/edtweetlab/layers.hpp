#ifndef EDTWEETLAB_LAYERS_HPP_
#define EDTWEETLAB_LAYERS_HPP_

#include <cmath>
#include <utility>
#include <vector>

#include "edtweetlab/autograd.hpp"
#include "edtweetlab/tensor.hpp"
#include "edtweetlab/util.hpp"

namespace edtweetlab {

inline void check_finite(const Tensor& t, const char* where) {
  if (!t.all_finite()) throw Error(std::string("non-finite values in ") + where);
}

// --- initializers ------------------------------------------------------------

inline Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

inline Tensor uniform_init(std::size_t rows, std::size_t cols, double extent, Rng& rng) {
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-extent, extent);
  return t;
}

// --- LSTM cell ---------------------------------------------------------------

// Gate layout follows x * W + h_prev * U + b with row-vector states:
// W is input_size x hidden_size, U is hidden_size x hidden_size, b is
// 1 x hidden_size. Gates i, f, o are sigmoids, candidate g is tanh.
struct LstmCellParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor wi, wf, wo, wg;
  Tensor ui, uf, uo, ug;
  Tensor bi, bf, bo, bg;

  // Glorot weights, zero biases except the forget gate bias, which starts at
  // 1.0 so early training does not flush the cell state.
  static LstmCellParams init(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
    if (input_size == 0 || hidden_size == 0) {
      throw InvalidArgument("lstm cell sizes must be positive");
    }
    LstmCellParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    for (Tensor* w : {&p.wi, &p.wf, &p.wo, &p.wg}) *w = glorot_uniform(input_size, hidden_size, rng);
    for (Tensor* u : {&p.ui, &p.uf, &p.uo, &p.ug}) *u = glorot_uniform(hidden_size, hidden_size, rng);
    for (Tensor* b : {&p.bi, &p.bo, &p.bg}) *b = Tensor(1, hidden_size);
    p.bf = Tensor(1, hidden_size, 1.0);
    return p;
  }

  static LstmCellParams zeros(std::size_t input_size, std::size_t hidden_size) {
    if (input_size == 0 || hidden_size == 0) {
      throw InvalidArgument("lstm cell sizes must be positive");
    }
    LstmCellParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    for (Tensor* w : {&p.wi, &p.wf, &p.wo, &p.wg}) *w = Tensor(input_size, hidden_size);
    for (Tensor* u : {&p.ui, &p.uf, &p.uo, &p.ug}) *u = Tensor(hidden_size, hidden_size);
    for (Tensor* b : {&p.bi, &p.bf, &p.bo, &p.bg}) *b = Tensor(1, hidden_size);
    return p;
  }
};

inline void validate_lstm_inputs(const Tensor& x, const Tensor& h, const Tensor& c,
                                 const LstmCellParams& p) {
  if (x.cols() != p.input_size) throw InvalidArgument("lstm: input width mismatch");
  if (h.cols() != p.hidden_size || c.cols() != p.hidden_size) {
    throw InvalidArgument("lstm: state width mismatch");
  }
  if (h.rows() != x.rows() || c.rows() != x.rows()) {
    throw InvalidArgument("lstm: batch size mismatch");
  }
}

// One cell step on a batch of row-vector inputs. Returns (h', c').
inline std::pair<Tensor, Tensor> lstm_cell_forward(const Tensor& x, const Tensor& h,
                                                   const Tensor& c, const LstmCellParams& p) {
  validate_lstm_inputs(x, h, c, p);
  using namespace ten;
  Tensor i = sigmoid(add_rowwise(add(matmul(x, p.wi), matmul(h, p.ui)), p.bi));
  Tensor f = sigmoid(add_rowwise(add(matmul(x, p.wf), matmul(h, p.uf)), p.bf));
  Tensor o = sigmoid(add_rowwise(add(matmul(x, p.wo), matmul(h, p.uo)), p.bo));
  Tensor g = ten::tanh(add_rowwise(add(matmul(x, p.wg), matmul(h, p.ug)), p.bg));
  Tensor c_next = add(hadamard(f, c), hadamard(i, g));
  Tensor h_next = hadamard(o, ten::tanh(c_next));
  check_finite(h_next, "lstm_cell_forward");
  check_finite(c_next, "lstm_cell_forward");
  return {h_next, c_next};
}

// Tape-building twin of lstm_cell_forward, used for training.
struct LstmCellVars {
  ag::Var wi, wf, wo, wg, ui, uf, uo, ug, bi, bf, bo, bg;
  std::size_t hidden_size = 0;

  static LstmCellVars from(const LstmCellParams& p, bool requires_grad) {
    LstmCellVars v;
    v.hidden_size = p.hidden_size;
    v.wi = ag::leaf(p.wi, requires_grad);
    v.wf = ag::leaf(p.wf, requires_grad);
    v.wo = ag::leaf(p.wo, requires_grad);
    v.wg = ag::leaf(p.wg, requires_grad);
    v.ui = ag::leaf(p.ui, requires_grad);
    v.uf = ag::leaf(p.uf, requires_grad);
    v.uo = ag::leaf(p.uo, requires_grad);
    v.ug = ag::leaf(p.ug, requires_grad);
    v.bi = ag::leaf(p.bi, requires_grad);
    v.bf = ag::leaf(p.bf, requires_grad);
    v.bo = ag::leaf(p.bo, requires_grad);
    v.bg = ag::leaf(p.bg, requires_grad);
    return v;
  }

  std::vector<ag::Var> all() const {
    return {wi, wf, wo, wg, ui, uf, uo, ug, bi, bf, bo, bg};
  }
};

inline std::pair<ag::Var, ag::Var> lstm_step(const ag::Var& x, const ag::Var& h,
                                             const ag::Var& c, const LstmCellVars& p) {
  using namespace ag;
  Var i = sigmoid(add_rowwise(add(matmul(x, p.wi), matmul(h, p.ui)), p.bi));
  Var f = sigmoid(add_rowwise(add(matmul(x, p.wf), matmul(h, p.uf)), p.bf));
  Var o = sigmoid(add_rowwise(add(matmul(x, p.wo), matmul(h, p.uo)), p.bo));
  Var g = tanh_v(add_rowwise(add(matmul(x, p.wg), matmul(h, p.ug)), p.bg));
  Var c_next = add(hadamard(f, c), hadamard(i, g));
  Var h_next = hadamard(o, tanh_v(c_next));
  return {h_next, c_next};
}

// Runs forward and reverse scans over one sequence (rows of `seq` are time
// steps) from zero states and concatenates the two hidden sequences, so row t
// is [h_fwd_t, h_bwd_t]. Output is T x 2*hidden.
inline Tensor bilstm_forward(const Tensor& seq, const LstmCellParams& fwd,
                             const LstmCellParams& bwd) {
  if (fwd.hidden_size != bwd.hidden_size || fwd.input_size != bwd.input_size) {
    throw InvalidArgument("bilstm: direction parameter shapes differ");
  }
  std::size_t t_len = seq.rows();
  Tensor out(t_len, 2 * fwd.hidden_size);
  Tensor h(1, fwd.hidden_size), c(1, fwd.hidden_size);
  for (std::size_t t = 0; t < t_len; ++t) {
    auto [h2, c2] = lstm_cell_forward(ten::slice_rows(seq, t, 1), h, c, fwd);
    h = std::move(h2);
    c = std::move(c2);
    for (std::size_t j = 0; j < fwd.hidden_size; ++j) out.at(t, j) = h.at(0, j);
  }
  h = Tensor(1, bwd.hidden_size);
  c = Tensor(1, bwd.hidden_size);
  for (std::size_t t = t_len; t-- > 0;) {
    auto [h2, c2] = lstm_cell_forward(ten::slice_rows(seq, t, 1), h, c, bwd);
    h = std::move(h2);
    c = std::move(c2);
    for (std::size_t j = 0; j < bwd.hidden_size; ++j) out.at(t, fwd.hidden_size + j) = h.at(0, j);
  }
  return out;
}

// --- attention ---------------------------------------------------------------

// Scaled dot-product attention: softmax(Q K^T / sqrt(d_k) + mask) V.
// `mask` is an optional 1 x T_k additive row applied to every query row;
// -inf entries receive exactly zero attention weight.
inline Tensor attention_forward(const Tensor& q, const Tensor& k, const Tensor& v,
                                const Tensor* mask = nullptr) {
  if (q.cols() != k.cols()) throw InvalidArgument("attention: query/key width mismatch");
  if (k.rows() != v.rows()) throw InvalidArgument("attention: key/value length mismatch");
  if (mask && (mask->rows() != 1 || mask->cols() != k.rows())) {
    throw InvalidArgument("attention: mask must be 1 x key-length");
  }
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor scores = ten::scale(ten::matmul(q, ten::transpose(k)), inv_sqrt_d);
  if (mask) {
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      for (std::size_t j = 0; j < scores.cols(); ++j) scores.at(i, j) += mask->at(0, j);
    }
  }
  Tensor out = ten::matmul(ten::softmax_rows(scores), v);
  check_finite(out, "attention_forward");
  return out;
}

inline ag::Var attention_graph(const ag::Var& q, const ag::Var& k, const ag::Var& v,
                               const Tensor* mask = nullptr) {
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.value().cols()));
  ag::Var scores = ag::scale(ag::matmul(q, ag::transpose(k)), inv_sqrt_d);
  if (mask) {
    Tensor m(scores.value().rows(), scores.value().cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) m.at(i, j) = mask->at(0, j);
    }
    scores = ag::add(scores, ag::constant(std::move(m)));
  }
  return ag::matmul(ag::softmax_rows(scores), v);
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_LAYERS_HPP_
