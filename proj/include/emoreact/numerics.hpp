#pragma once

// Dense reverse-mode differentiation over Eigen matrices. Every value on the
// tape is a 2-D matrix; vectors are 1xN rows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emoreact/random.hpp"

namespace emoreact::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  const Matrix<Scalar>& value() const { return tape->value(*this); }
  const Matrix<Scalar>& grad() const { return tape->grad(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Tape&, const Mat&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, {}); }
  Var<Scalar> variable(Mat value) { return push(std::move(value), true, {}); }

  /// Records an op result. `backward` receives d(root)/d(result) and must
  /// call accumulate() on its inputs.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, Backward backward) {
    const bool needs = std::any_of(inputs.begin(), inputs.end(), [this](Var<Scalar> v) { return needs_grad(v); });
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  Var<Scalar> record(Mat value, std::span<const Var<Scalar>> inputs, Backward backward) {
    const bool needs = std::any_of(inputs.begin(), inputs.end(), [this](Var<Scalar> v) { return needs_grad(v); });
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  const Mat& value(Var<Scalar> v) const { return nodes_.at(v.id).value; }

  /// Gradient after backward(); a zero matrix of the value's shape when the
  /// node did not influence the root.
  const Mat& grad(Var<Scalar> v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.size() == 0 && n.value.size() != 0) {
      n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    }
    return n.grad;
  }

  bool needs_grad(Var<Scalar> v) const { return nodes_.at(v.id).needs_grad; }

  void accumulate(Var<Scalar> v, const Mat& g) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
      throw NumericsError("gradient shape mismatch on tape node " + std::to_string(v.id));
    }
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a 1x1 root.
  void backward(Var<Scalar> root) {
    if (root.tape != this) throw NumericsError("backward: variable belongs to another tape");
    const Mat& rv = value(root);
    if (rv.rows() != 1 || rv.cols() != 1) throw NumericsError("backward: root must be scalar");
    for (Node& n : nodes_) n.grad.resize(0, 0);
    nodes_[root.id].grad = Mat::Constant(1, 1, Scalar(1));
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() != 0) {
        const Mat g = n.grad;
        n.backward(*this, g);
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    mutable Mat grad;
    bool needs_grad = false;
    Backward backward;
  };

  Var<Scalar> push(Mat value, bool needs, Backward backward) {
    nodes_.push_back(Node{std::move(value), Mat{}, needs, std::move(backward)});
    return Var<Scalar>{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <typename Scalar>
void require_same_tape(Var<Scalar> a, Var<Scalar> b) {
  if (a.tape != b.tape) throw NumericsError("operands live on different tapes");
}

template <typename Scalar>
void require_finite(const Matrix<Scalar>& m, const char* what) {
  if (!m.allFinite()) throw NumericsError(std::string(what) + ": non-finite value");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementary ops

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b);
  if (a.cols() != b.rows()) throw NumericsError("matmul: inner dimensions differ");
  Matrix<Scalar> out = a.value() * b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw NumericsError("add: shape mismatch");
  Matrix<Scalar> out = a.value() + b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  return add(a, b);
}

/// a (n x m) + row (1 x m), broadcast over rows.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
  detail::require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw NumericsError("add_row: shape mismatch");
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape->record(std::move(out), {a, row}, [a, row](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g);
    if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> cwise_product(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw NumericsError("cwise_product: shape mismatch");
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  Matrix<Scalar> out = a.value() * s;
  return a.tape->record(std::move(out), {a},
                        [a, s](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(a, g * s); });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape->record(std::move(out), {a}, [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, (t.value(a).array() > Scalar(0)).select(g, Scalar(0)));
  });
}

template <typename Scalar>
Matrix<Scalar> sigmoid_value(const Matrix<Scalar>& x) {
  return x.unaryExpr([](Scalar v) {
    if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (Scalar(1) + e);
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  Matrix<Scalar> out = sigmoid_value<Scalar>(a.value());
  Matrix<Scalar> slope = out.cwiseProduct((Scalar(1) - out.array()).matrix());
  return a.tape->record(std::move(out), {a}, [a, slope = std::move(slope)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g.cwiseProduct(slope));
  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return a.tape->record(std::move(out), {a}, [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const auto th = t.value(a).array().tanh();
    t.accumulate(a, (g.array() * (Scalar(1) - th.square())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw NumericsError("slice_cols: out of range");
  Matrix<Scalar> out = a.value().middleCols(start, count);
  return a.tape->record(std::move(out), {a}, [a, start, count](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(t.value(a).rows(), t.value(a).cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(Var<Scalar> a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw NumericsError("slice_rows: out of range");
  Matrix<Scalar> out = a.value().middleRows(start, count);
  return a.tape->record(std::move(out), {a}, [a, start, count](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(t.value(a).rows(), t.value(a).cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

/// Horizontal concatenation of blocks with equal row counts.
template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw NumericsError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.tape != parts.front().tape) throw NumericsError("concat_cols: operands live on different tapes");
    if (p.rows() != rows) throw NumericsError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return parts.front().tape->record(std::move(out), parts,
                                    [inputs](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                                      Eigen::Index off = 0;
                                      for (const auto& p : inputs) {
                                        const Eigen::Index c = t.value(p).cols();
                                        if (t.needs_grad(p)) t.accumulate(p, g.middleCols(off, c));
                                        off += c;
                                      }
                                    });
}

/// Sum of all entries, as a 1x1 value.
template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Matrix<Scalar> out = Matrix<Scalar>::Constant(1, 1, a.value().sum());
  return a.tape->record(std::move(out), {a}, [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, Matrix<Scalar>::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> sum_squares(Var<Scalar> a) {
  Matrix<Scalar> out = Matrix<Scalar>::Constant(1, 1, a.value().squaredNorm());
  return a.tape->record(std::move(out), {a}, [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, t.value(a) * (Scalar(2) * g(0, 0)));
  });
}

/// Sum of 1x1 values.
template <typename Scalar>
Var<Scalar> add_scalars(std::span<const Var<Scalar>> terms) {
  if (terms.empty()) throw NumericsError("add_scalars: no inputs");
  Scalar total = 0;
  for (const auto& v : terms) {
    if (v.rows() != 1 || v.cols() != 1) throw NumericsError("add_scalars: operands must be 1x1");
    total += v.value()(0, 0);
  }
  std::vector<Var<Scalar>> inputs(terms.begin(), terms.end());
  return terms.front().tape->record(Matrix<Scalar>::Constant(1, 1, total), terms,
                                    [inputs](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                                      for (const auto& v : inputs) t.accumulate(v, g);
                                    });
}

// ---------------------------------------------------------------------------
// Network ops

/// Valid 1-D convolution with stride 1 over the rows of `input` (L x D).
/// `filters` is F x (h*D); row f holds filter f's window flattened row-major,
/// so window row r, dim d sits at column r*D + d. Returns (L-h+1) x F.
template <typename Scalar>
Var<Scalar> conv1d_valid(Var<Scalar> input, Var<Scalar> filters, Var<Scalar> bias) {
  detail::require_same_tape(input, filters);
  detail::require_same_tape(input, bias);
  const Eigen::Index length = input.rows();
  const Eigen::Index dim = input.cols();
  if (dim == 0 || filters.cols() % dim != 0) throw NumericsError("conv1d_valid: filter width is not a multiple of D");
  const Eigen::Index height = filters.cols() / dim;
  if (height < 1) throw NumericsError("conv1d_valid: filter height must be >= 1");
  if (length < height) throw NumericsError("conv1d_valid: input shorter than filter height");
  if (bias.rows() != 1 || bias.cols() != filters.rows()) throw NumericsError("conv1d_valid: bias shape mismatch");

  const Eigen::Index windows = length - height + 1;
  // Row i of the unrolled input is rows i..i+h-1 of the input laid end to end.
  Matrix<Scalar> unrolled(windows, height * dim);
  const Matrix<Scalar>& x = input.value();
  for (Eigen::Index i = 0; i < windows; ++i) {
    for (Eigen::Index r = 0; r < height; ++r) unrolled.block(i, r * dim, 1, dim) = x.row(i + r);
  }
  Matrix<Scalar> out = unrolled * filters.value().transpose();
  out.rowwise() += bias.value().row(0);

  return input.tape->record(
      std::move(out), {input, filters, bias},
      [input, filters, bias, unrolled = std::move(unrolled), height, dim, windows](Tape<Scalar>& t,
                                                                                  const Matrix<Scalar>& g) {
        if (t.needs_grad(filters)) t.accumulate(filters, g.transpose() * unrolled);
        if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
        if (t.needs_grad(input)) {
          const Matrix<Scalar> d_unrolled = g * t.value(filters);
          Matrix<Scalar> d_input = Matrix<Scalar>::Zero(t.value(input).rows(), dim);
          for (Eigen::Index i = 0; i < windows; ++i) {
            for (Eigen::Index r = 0; r < height; ++r) d_input.row(i + r) += d_unrolled.block(i, r * dim, 1, dim);
          }
          t.accumulate(input, d_input);
        }
      });
}

/// Column-wise max over the first `valid_length` rows. Returns 1 x F.
template <typename Scalar>
Var<Scalar> masked_max_pool(Var<Scalar> seq, Eigen::Index valid_length) {
  if (valid_length < 1) throw NumericsError("masked_max_pool: valid_length must be >= 1");
  if (valid_length > seq.rows()) throw NumericsError("masked_max_pool: valid_length exceeds sequence length");
  const Matrix<Scalar>& x = seq.value();
  const Eigen::Index features = x.cols();
  Matrix<Scalar> out(1, features);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(features));
  for (Eigen::Index f = 0; f < features; ++f) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < valid_length; ++i) {
      if (x(i, f) > x(best, f)) best = i;
    }
    argmax[static_cast<std::size_t>(f)] = best;
    out(0, f) = x(best, f);
  }
  return seq.tape->record(std::move(out), {seq}, [seq, argmax = std::move(argmax)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> d = Matrix<Scalar>::Zero(t.value(seq).rows(), t.value(seq).cols());
    for (std::size_t f = 0; f < argmax.size(); ++f) {
      d(argmax[f], static_cast<Eigen::Index>(f)) = g(0, static_cast<Eigen::Index>(f));
    }
    t.accumulate(seq, d);
  });
}

/// Inverted dropout: in train mode each entry is kept with probability
/// 1 - rate and scaled by 1 / (1 - rate). Identity otherwise.
template <typename Scalar>
Var<Scalar> dropout(Var<Scalar> x, double rate, Rng& rng, bool train_mode) {
  if (!(rate >= 0.0 && rate < 1.0)) throw NumericsError("dropout: rate must lie in [0, 1)");
  if (!train_mode || rate == 0.0) return x;
  const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
  Matrix<Scalar> mask(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < mask.cols(); ++j) {
    for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = uniform01(rng) >= rate ? keep_scale : Scalar(0);
  }
  Matrix<Scalar> out = x.value().cwiseProduct(mask);
  return x.tape->record(std::move(out), {x}, [x, mask = std::move(mask)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(x, g.cwiseProduct(mask));
  });
}

/// Row-wise softmax with max-shift.
template <typename Scalar>
Matrix<Scalar> softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> log_softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    const Scalar lse = m + std::log((logits.row(r).array() - m).exp().sum());
    out.row(r) = (logits.row(r).array() - lse).matrix();
  }
  return out;
}

inline constexpr double k_simplex_tolerance = 1e-6;

template <typename Derived>
bool on_simplex(const Eigen::MatrixBase<Derived>& p, double tolerance = k_simplex_tolerance) {
  if (p.size() == 0 || !p.allFinite()) return false;
  if ((p.array() < -tolerance).any()) return false;
  return std::abs(static_cast<double>(p.sum()) - 1.0) <= tolerance;
}

/// -sum(target * log softmax(logits)) for a 1 x K logit row. The target must
/// be a distribution.
template <typename Scalar>
Var<Scalar> cross_entropy_soft(Var<Scalar> logits, const RowVector<Scalar>& target) {
  if (logits.rows() != 1 || logits.cols() != target.cols()) throw NumericsError("cross_entropy_soft: shape mismatch");
  if (!on_simplex(target)) throw NumericsError("cross_entropy_soft: target is not a distribution");
  const Matrix<Scalar> logp = log_softmax<Scalar>(logits.value());
  Matrix<Scalar> out = Matrix<Scalar>::Constant(1, 1, -(target.array() * logp.row(0).array()).sum());
  return logits.tape->record(std::move(out), {logits}, [logits, target](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    // d/dz = softmax(z) * sum(target) - target
    const Matrix<Scalar> p = softmax<Scalar>(t.value(logits));
    t.accumulate(logits, ((p * target.sum() - target) * g(0, 0)).eval());
  });
}

/// lambda * sum over `weights` of squared Frobenius norms.
template <typename Scalar>
Var<Scalar> l2_penalty(std::span<const Var<Scalar>> weights, Scalar lambda) {
  if (weights.empty()) throw NumericsError("l2_penalty: no weights");
  std::vector<Var<Scalar>> terms;
  terms.reserve(weights.size());
  for (const auto& w : weights) terms.push_back(sum_squares(w));
  return scale(add_scalars<Scalar>(terms), lambda);
}

/// Soft-label cross-entropy plus an L2 penalty on `weights`.
template <typename Scalar>
Var<Scalar> cross_entropy_soft(Var<Scalar> logits, const RowVector<Scalar>& target,
                               std::span<const Var<Scalar>> weights, Scalar lambda) {
  Var<Scalar> ce = cross_entropy_soft(logits, target);
  if (weights.empty() || lambda == Scalar(0)) return ce;
  const std::array<Var<Scalar>, 2> terms{ce, l2_penalty(weights, lambda)};
  return add_scalars<Scalar>(terms);
}

// ---------------------------------------------------------------------------
// LSTM

/// Gate weights in column blocks (input, forget, output, candidate), each of
/// width H: z = x Wx + h Wh + b.
template <typename Scalar>
struct LstmWeights {
  Var<Scalar> input_weights;      // D x 4H
  Var<Scalar> recurrent_weights;  // H x 4H
  Var<Scalar> bias;               // 1 x 4H
};

template <typename Scalar>
struct LstmState {
  Var<Scalar> hidden;  // 1 x H
  Var<Scalar> cell;    // 1 x H
};

/// i, f, o = sigmoid(.), g = tanh(.), c' = f*c + i*g, h' = o*tanh(c').
template <typename Scalar>
LstmState<Scalar> lstm_step(Var<Scalar> x, const LstmState<Scalar>& prev, const LstmWeights<Scalar>& w) {
  const Eigen::Index hidden = prev.hidden.cols();
  if (w.input_weights.cols() != 4 * hidden || w.recurrent_weights.cols() != 4 * hidden ||
      w.recurrent_weights.rows() != hidden || w.bias.cols() != 4 * hidden || x.cols() != w.input_weights.rows() ||
      prev.cell.cols() != hidden) {
    throw NumericsError("lstm_step: dimension mismatch");
  }
  Var<Scalar> z = add_row(add(matmul(x, w.input_weights), matmul(prev.hidden, w.recurrent_weights)), w.bias);
  Var<Scalar> i = sigmoid(slice_cols(z, 0, hidden));
  Var<Scalar> f = sigmoid(slice_cols(z, hidden, hidden));
  Var<Scalar> o = sigmoid(slice_cols(z, 2 * hidden, hidden));
  Var<Scalar> g = tanh(slice_cols(z, 3 * hidden, hidden));
  Var<Scalar> c = add(cwise_product(f, prev.cell), cwise_product(i, g));
  Var<Scalar> h = cwise_product(o, tanh(c));
  return {h, c};
}

// ---------------------------------------------------------------------------
// Parameters, optimizers, gradient checking

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  /// Included in the L2 penalty.
  bool regularized = true;
};

template <typename Scalar>
class ParameterSet {
 public:
  Parameter<Scalar>& add(std::string name, Matrix<Scalar> value, bool regularized = true) {
    for (const auto& p : params_) {
      if (p.name == name) throw NumericsError("duplicate parameter '" + name + "'");
    }
    params_.push_back({std::move(name), std::move(value), regularized});
    return params_.back();
  }

  Parameter<Scalar>& operator[](std::size_t i) { return params_.at(i); }
  const Parameter<Scalar>& operator[](std::size_t i) const { return params_.at(i); }

  const Parameter<Scalar>* find(std::string_view name) const {
    for (const auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  Parameter<Scalar>* find(std::string_view name) {
    return const_cast<Parameter<Scalar>*>(std::as_const(*this).find(name));
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  Eigen::Index scalar_count() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  /// Places every parameter on `tape` as a gradient-tracked leaf.
  std::vector<Var<Scalar>> bind(Tape<Scalar>& tape) const {
    std::vector<Var<Scalar>> vars;
    vars.reserve(params_.size());
    for (const auto& p : params_) vars.push_back(tape.variable(p.value));
    return vars;
  }

 private:
  std::vector<Parameter<Scalar>> params_;
};

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  void step(ParameterSet<Scalar>& params, std::span<const Matrix<Scalar>> grads) {
    if (grads.size() != params.size()) throw NumericsError("optimizer: gradient count mismatch");
    if (config_.kind == OptimizerKind::adam && first_.empty()) {
      for (const auto& p : params) {
        first_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
        second_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
      }
    }
    ++steps_;
    const Scalar lr = Scalar(config_.learning_rate);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Matrix<Scalar>& w = params[k].value;
      const Matrix<Scalar>& g = grads[k];
      if (g.rows() != w.rows() || g.cols() != w.cols()) {
        throw NumericsError("optimizer: gradient shape mismatch for '" + params[k].name + "'");
      }
      if (config_.kind == OptimizerKind::sgd) {
        w -= lr * g;
        continue;
      }
      const Scalar b1 = Scalar(config_.beta1);
      const Scalar b2 = Scalar(config_.beta2);
      first_[k] = b1 * first_[k] + (Scalar(1) - b1) * g;
      second_[k] = b2 * second_[k] + (Scalar(1) - b2) * g.cwiseAbs2();
      const Scalar c1 = Scalar(1) - Scalar(std::pow(config_.beta1, static_cast<double>(steps_)));
      const Scalar c2 = Scalar(1) - Scalar(std::pow(config_.beta2, static_cast<double>(steps_)));
      w.array() -= lr * (first_[k].array() / c1) / ((second_[k].array() / c2).sqrt() + Scalar(config_.epsilon));
    }
  }

  const OptimizerConfig& config() const { return config_; }
  long steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  std::vector<Matrix<Scalar>> first_;
  std::vector<Matrix<Scalar>> second_;
  long steps_ = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients with central differences. `build` gets a
/// tape and the bound parameters and returns a 1x1 loss; it must be a pure
/// function of the parameter values. Relative error is
/// |a - n| / max(|a|, |n|, floor).
template <typename Scalar, typename Build>
GradCheckResult grad_check(Build&& build, ParameterSet<Scalar>& params, double eps, double floor = 1e-6) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw NumericsError("grad_check: eps must lie in [1e-7, 1e-3]");

  std::vector<Matrix<Scalar>> analytic;
  {
    Tape<Scalar> tape;
    const auto vars = params.bind(tape);
    Var<Scalar> loss = build(tape, std::span<const Var<Scalar>>(vars));
    detail::require_finite(loss.value(), "grad_check loss");
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }

  auto evaluate = [&]() -> double {
    Tape<Scalar> tape;
    const auto vars = params.bind(tape);
    Var<Scalar> loss = build(tape, std::span<const Var<Scalar>>(vars));
    detail::require_finite(loss.value(), "grad_check loss");
    return static_cast<double>(loss.value()(0, 0));
  };

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix<Scalar>& w = params[k].value;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const Scalar saved = w.data()[i];
      w.data()[i] = saved + Scalar(eps);
      const double up = evaluate();
      w.data()[i] = saved - Scalar(eps);
      const double down = evaluate();
      w.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = static_cast<double>(analytic[k].data()[i]);
      if (!std::isfinite(numeric) || !std::isfinite(a)) throw NumericsError("grad_check: non-finite gradient");
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.checked;
      if (rel > result.max_relative_error || result.worst_index < 0) {
        result.max_relative_error = std::max(rel, result.max_relative_error);
        if (rel >= result.max_relative_error) {
          result.worst_parameter = params[k].name;
          result.worst_index = i;
          result.analytic = a;
          result.numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace emoreact::nn
