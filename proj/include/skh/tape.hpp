// Reverse-mode automatic differentiation over a flat computation tape.
//
// Nodes are appended in execution order (define-by-run), so the tape is
// topologically sorted by construction. backward() walks it once in reverse
// and accumulates gradients; leaves bound to external parameter tensors
// receive their accumulated gradient at the end of the sweep.
//
// Masking convention: masks are additive, 0 = attend, kBlock = -1e9 =
// blocked. Blocked logits underflow to probability exactly 0 after
// exp-normalization.

#ifndef SKH_TAPE_HPP
#define SKH_TAPE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "skh/common.hpp"
#include "skh/tensor.hpp"

namespace skh {

inline constexpr double kBlock = -1e9;
// A mask entry at or below this counts as blocking; kBlock survives additive
// composition of a few masks without crossing the threshold.
inline constexpr double kBlockThreshold = -1e8;

class Tape;

// Lightweight handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  // backward closures receive the tape and the node's own id.
  using BackFn = std::function<void(Tape&, int)>;

  struct Node {
    Tensor value;
    std::vector<double> grad;  // allocated lazily during backward()
    BackFn backward;           // empty for leaves and constants
    Tensor* external = nullptr;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& value(Var v) const { return value(v.id); }

  std::vector<double>& grad_buf(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() != n.value.numel()) n.grad.assign(n.value.numel(), 0.0);
    return n.grad;
  }

  bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }

  // Constant input; no gradient flows back to the caller's tensor.
  Var constant(Tensor v) {
    nodes_.push_back(Node{std::move(v), {}, {}, nullptr});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  // Parameter leaf: the value is copied, and after backward() the gradient
  // accumulated here is added into param->grad.
  Var leaf(Tensor* param) {
    nodes_.push_back(Node{*param, {}, {}, param});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var emit(Tensor value, BackFn backward) {
    nodes_.push_back(Node{std::move(value), {}, std::move(backward), nullptr});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  // Reverse sweep from a scalar output.
  void backward(Var loss) {
    const Tensor& out = value(loss);
    if (out.numel() != 1)
      throw DimensionError("backward() needs a scalar output, got " + shape_str(out.shape));
    for (auto& n : nodes_) n.grad.clear();
    grad_buf(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.empty()) continue;  // not on a path to the loss
      if (n.backward) n.backward(*this, id);
      if (n.external != nullptr && n.external->requires_grad) {
        n.external->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) n.external->grad[i] += n.grad[i];
      }
    }
  }

 private:
  std::vector<Node> nodes_;
};

namespace ops {

namespace detail {

inline const Tensor& val(Var v) { return v.tape->value(v.id); }

inline Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw DimensionError("operands live on different tapes");
  return *a.tape;
}

enum class Bcast { kSame, kRow, kScalar };

inline Bcast bcast_kind(const Tensor& a, const Tensor& b) {
  if (same_shape(a, b)) return Bcast::kSame;
  if (b.numel() == 1) return Bcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::kRow;
  throw DimensionError("cannot broadcast " + shape_str(b.shape) + " over " + shape_str(a.shape));
}

// Accumulate g (shaped like a) into the grad of b under the given broadcast.
inline void reduce_into(Tape& t, int bid, Bcast k, const Tensor& a,
                        const std::vector<double>& g, double sign) {
  std::vector<double>& gb = t.grad_buf(bid);
  switch (k) {
    case Bcast::kSame:
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      break;
    case Bcast::kRow: {
      const std::size_t r = a.rows(), c = a.cols();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += sign * g[i * c + j];
      break;
    }
    case Bcast::kScalar: {
      double s = 0.0;
      for (double x : g) s += x;
      gb[0] += sign * s;
      break;
    }
  }
}

}  // namespace detail

// ---- matmul / transpose ---------------------------------------------------

inline Var matmul(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  const Tensor& A = detail::val(a);
  const Tensor& B = detail::val(b);
  if (A.cols() != B.rows())
    throw DimensionError("matmul inner dims disagree: " + shape_str(A.shape) + " x " +
                         shape_str(B.shape));
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C = Tensor::zeros(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = &A.data[i * k];
    double* crow = &C.data[i * n];
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = &B.data[kk * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  const int ai = a.id, bi = b.id;
  return t.emit(std::move(C), [ai, bi, m, k, n](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    const Tensor& Av = tp.value(ai);
    const Tensor& Bv = tp.value(bi);
    std::vector<double>& ga = tp.grad_buf(ai);
    std::vector<double>& gb = tp.grad_buf(bi);
    // dA = G * B^T
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double gv = g[i * n + j];
        if (gv == 0.0) continue;
        for (std::size_t kk = 0; kk < k; ++kk) ga[i * k + kk] += gv * Bv.data[kk * n + j];
      }
    // dB = A^T * G
    for (std::size_t kk = 0; kk < k; ++kk)
      for (std::size_t i = 0; i < m; ++i) {
        const double av = Av.data[i * k + kk];
        if (av == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) gb[kk * n + j] += av * g[i * n + j];
      }
  });
}

inline Var transpose(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = detail::val(a);
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out = Tensor::zeros(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = A.data[i * c + j];
  const int ai = a.id;
  return t.emit(std::move(out), [ai, r, c](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

// ---- elementwise binary (broadcast: same shape, 1-row, or 1x1) -------------

inline Var add(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  const Tensor& A = detail::val(a);
  const Tensor& B = detail::val(b);
  const auto k = detail::bcast_kind(A, B);
  Tensor out = A;
  const std::size_t c = A.cols();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double bv = (k == detail::Bcast::kSame)  ? B.data[i]
                      : (k == detail::Bcast::kRow) ? B.data[i % c]
                                                   : B.data[0];
    out.data[i] += bv;
  }
  const int ai = a.id, bi = b.id;
  return t.emit(std::move(out), [ai, bi, k](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    detail::reduce_into(tp, bi, k, tp.value(ai), g, 1.0);
  });
}

inline Var sub(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  const Tensor& A = detail::val(a);
  const Tensor& B = detail::val(b);
  const auto k = detail::bcast_kind(A, B);
  Tensor out = A;
  const std::size_t c = A.cols();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double bv = (k == detail::Bcast::kSame)  ? B.data[i]
                      : (k == detail::Bcast::kRow) ? B.data[i % c]
                                                   : B.data[0];
    out.data[i] -= bv;
  }
  const int ai = a.id, bi = b.id;
  return t.emit(std::move(out), [ai, bi, k](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    detail::reduce_into(tp, bi, k, tp.value(ai), g, -1.0);
  });
}

inline Var mul(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  const Tensor& A = detail::val(a);
  const Tensor& B = detail::val(b);
  const auto k = detail::bcast_kind(A, B);
  Tensor out = A;
  const std::size_t c = A.cols();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double bv = (k == detail::Bcast::kSame)  ? B.data[i]
                      : (k == detail::Bcast::kRow) ? B.data[i % c]
                                                   : B.data[0];
    out.data[i] *= bv;
  }
  const int ai = a.id, bi = b.id;
  return t.emit(std::move(out), [ai, bi, k](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    const Tensor& Av = tp.value(ai);
    const Tensor& Bv = tp.value(bi);
    const std::size_t c2 = Av.cols();
    {
      std::vector<double>& ga = tp.grad_buf(ai);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double bv = (k == detail::Bcast::kSame)  ? Bv.data[i]
                          : (k == detail::Bcast::kRow) ? Bv.data[i % c2]
                                                       : Bv.data[0];
        ga[i] += g[i] * bv;
      }
    }
    std::vector<double> ga_times(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga_times[i] = g[i] * Av.data[i];
    detail::reduce_into(tp, bi, k, Av, ga_times, 1.0);
  });
}

inline Var scale(Var a, double c) {
  Tape& t = *a.tape;
  Tensor out = detail::val(a);
  for (double& x : out.data) x *= c;
  const int ai = a.id;
  return t.emit(std::move(out), [ai, c](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

inline Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  Tensor out = detail::val(a);
  for (double& x : out.data) x += c;
  const int ai = a.id;
  return t.emit(std::move(out), [ai](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

// ---- elementwise unary ------------------------------------------------------

inline Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Tensor out = detail::val(a);
  for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  const int ai = a.id;
  return t.emit(std::move(out), [ai](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    const Tensor& y = tp.value(self);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y.data[i] * (1.0 - y.data[i]);
  });
}

inline Var tanh_op(Var a) {
  Tape& t = *a.tape;
  Tensor out = detail::val(a);
  for (double& x : out.data) x = std::tanh(x);
  const int ai = a.id;
  return t.emit(std::move(out), [ai](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    const Tensor& y = tp.value(self);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y.data[i] * y.data[i]);
  });
}

inline Var relu(Var a) {
  Tape& t = *a.tape;
  Tensor out = detail::val(a);
  for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  const int ai = a.id;
  return t.emit(std::move(out), [ai](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    const Tensor& x = tp.value(ai);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.data[i] > 0.0) ga[i] += g[i];
  });
}

// ---- structural -------------------------------------------------------------

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of zero tensors");
  Tape& t = *parts[0].tape;
  const std::size_t r = detail::val(parts[0]).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    if (detail::val(p).rows() != r)
      throw DimensionError("concat_cols row mismatch: " + shape_str(detail::val(p).shape));
    total += detail::val(p).cols();
  }
  Tensor out = Tensor::zeros(r, total);
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& P = detail::val(p);
    const std::size_t c = P.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.data[i * total + off + j] = P.data[i * c + j];
    ids.push_back(p.id);
    widths.push_back(c);
    off += c;
  }
  return t.emit(std::move(out), [ids, widths, r, total](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::size_t off2 = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      std::vector<double>& gp = tp.grad_buf(ids[p]);
      const std::size_t c = widths[p];
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * total + off2 + j];
      off2 += c;
    }
  });
}

inline Var vstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("vstack of zero tensors");
  Tape& t = *parts[0].tape;
  const std::size_t c = detail::val(parts[0]).cols();
  std::size_t total = 0;
  for (Var p : parts) {
    if (detail::val(p).cols() != c)
      throw DimensionError("vstack col mismatch: " + shape_str(detail::val(p).shape));
    total += detail::val(p).rows();
  }
  Tensor out = Tensor::zeros(total, c);
  std::vector<int> ids;
  std::vector<std::size_t> heights;
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& P = detail::val(p);
    const std::size_t r = P.rows();
    for (std::size_t i = 0; i < r * c; ++i) out.data[off * c + i] = P.data[i];
    ids.push_back(p.id);
    heights.push_back(r);
    off += r;
  }
  return t.emit(std::move(out), [ids, heights, c](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::size_t off2 = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      std::vector<double>& gp = tp.grad_buf(ids[p]);
      const std::size_t r = heights[p];
      for (std::size_t i = 0; i < r * c; ++i) gp[i] += g[off2 * c + i];
      off2 += r;
    }
  });
}

inline Var slice_cols(Var a, std::size_t start, std::size_t len) {
  Tape& t = *a.tape;
  const Tensor& A = detail::val(a);
  if (start + len > A.cols())
    throw DimensionError("slice_cols [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + shape_str(A.shape));
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out = Tensor::zeros(r, len);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < len; ++j) out.data[i * len + j] = A.data[i * c + start + j];
  const int ai = a.id;
  return t.emit(std::move(out), [ai, start, len, r, c](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < len; ++j) ga[i * c + start + j] += g[i * len + j];
  });
}

inline Var slice_rows(Var a, std::size_t start, std::size_t len) {
  Tape& t = *a.tape;
  const Tensor& A = detail::val(a);
  if (start + len > A.rows())
    throw DimensionError("slice_rows [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + shape_str(A.shape));
  const std::size_t c = A.cols();
  Tensor out = Tensor::zeros(len, c);
  for (std::size_t i = 0; i < len * c; ++i) out.data[i] = A.data[start * c + i];
  const int ai = a.id;
  return t.emit(std::move(out), [ai, start, len, c](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& ga = tp.grad_buf(ai);
    for (std::size_t i = 0; i < len * c; ++i) ga[start * c + i] += g[i];
  });
}

// Row gather; the embedding lookup. Backward is scatter-add.
inline Var gather_rows(Var table, const std::vector<std::size_t>& idx) {
  Tape& t = *table.tape;
  const Tensor& T = detail::val(table);
  const std::size_t c = T.cols();
  for (std::size_t i : idx)
    if (i >= T.rows())
      throw DimensionError("gather_rows index " + std::to_string(i) + " out of " +
                           shape_str(T.shape));
  Tensor out = Tensor::zeros(idx.size(), c);
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < c; ++j) out.data[r * c + j] = T.data[idx[r] * c + j];
  const int ti = table.id;
  return t.emit(std::move(out), [ti, idx, c](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& gt = tp.grad_buf(ti);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) gt[idx[r] * c + j] += g[r * c + j];
  });
}

// ---- normalization / regularization ----------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

inline Var layer_norm(Var x, Var gamma, Var beta) {
  Tape& t = *x.tape;
  const Tensor& X = detail::val(x);
  const Tensor& G = detail::val(gamma);
  const Tensor& B = detail::val(beta);
  const std::size_t r = X.rows(), c = X.cols();
  if (G.rows() != 1 || G.cols() != c || B.rows() != 1 || B.cols() != c)
    throw DimensionError("layer_norm affine params must be 1x" + std::to_string(c) + ", got " +
                         shape_str(G.shape) + " and " + shape_str(B.shape));
  Tensor out = Tensor::zeros(r, c);
  Tensor xhat = Tensor::zeros(r, c);
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += X.data[i * c + j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = X.data[i * c + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double xh = (X.data[i * c + j] - mean) * is;
      xhat.data[i * c + j] = xh;
      out.data[i * c + j] = G.data[j] * xh + B.data[j];
    }
  }
  const int xi = x.id, gi = gamma.id, bi = beta.id;
  return t.emit(std::move(out), [xi, gi, bi, xhat, inv_std, r, c](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    const Tensor& Gv = tp.value(gi);
    std::vector<double>& gx = tp.grad_buf(xi);
    std::vector<double>& gg = tp.grad_buf(gi);
    std::vector<double>& gb = tp.grad_buf(bi);
    for (std::size_t i = 0; i < r; ++i) {
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double go = g[i * c + j];
        const double xh = xhat.data[i * c + j];
        gg[j] += go * xh;
        gb[j] += go;
        const double dxh = go * Gv.data[j];
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * xh;
      }
      const double n = static_cast<double>(c);
      for (std::size_t j = 0; j < c; ++j) {
        const double dxh = g[i * c + j] * Gv.data[j];
        gx[i * c + j] +=
            inv_std[i] * (dxh - sum_dxhat / n - xhat.data[i * c + j] * sum_dxhat_xhat / n);
      }
    }
  });
}

// Inverted dropout with an explicit keep mask (entries 0 or 1/(1-p)).
// Callers draw the mask from a counter-seeded stream so traces reproduce.
inline Var dropout_mask(Var x, const Tensor& keep_mask) {
  Tape& t = *x.tape;
  const Tensor& X = detail::val(x);
  if (!same_shape(X, keep_mask))
    throw DimensionError("dropout mask " + shape_str(keep_mask.shape) + " vs input " +
                         shape_str(X.shape));
  Tensor out = X;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= keep_mask.data[i];
  const int xi = x.id;
  return t.emit(std::move(out), [xi, keep_mask](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& gx = tp.grad_buf(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * keep_mask.data[i];
  });
}

inline Tensor make_keep_mask(std::size_t r, std::size_t c, double p, RngStream& rng) {
  Tensor m = Tensor::zeros(r, c);
  const double keep = 1.0 - p;
  for (double& x : m.data) x = (rng.uniform() < p) ? 0.0 : 1.0 / keep;
  return m;
}

// ---- softmax family ----------------------------------------------------------

namespace detail {
// Returns row-wise softmax of (scores + mask); throws on fully blocked rows.
inline Tensor softmax_forward(const Tensor& S, const Tensor& mask, const char* who) {
  if (!same_shape(S, mask))
    throw DimensionError(std::string(who) + ": mask " + shape_str(mask.shape) + " vs scores " +
                         shape_str(S.shape));
  const std::size_t r = S.rows(), c = S.cols();
  Tensor P = Tensor::zeros(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    bool any_open = false;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (mask.data[i * c + j] > kBlockThreshold) {
        any_open = true;
        mx = std::max(mx, S.data[i * c + j] + mask.data[i * c + j]);
      }
    }
    if (!any_open)
      throw NumericError(std::string(who) + ": row " + std::to_string(i) + " fully blocked");
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(S.data[i * c + j] + mask.data[i * c + j] - mx);
      P.data[i * c + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < c; ++j) P.data[i * c + j] /= denom;
  }
  return P;
}
}  // namespace detail

inline Var masked_softmax(Var scores, const Tensor& mask) {
  Tape& t = *scores.tape;
  Tensor P = detail::softmax_forward(detail::val(scores), mask, "masked_softmax");
  const int si = scores.id;
  return t.emit(std::move(P), [si](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    const Tensor& P2 = tp.value(self);
    std::vector<double>& gs = tp.grad_buf(si);
    const std::size_t r = P2.rows(), c = P2.cols();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * P2.data[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        gs[i * c + j] += P2.data[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

inline Var log_softmax(Var scores, const Tensor& mask) {
  Tape& t = *scores.tape;
  const Tensor& S = detail::val(scores);
  Tensor P = detail::softmax_forward(S, mask, "log_softmax");
  const std::size_t r = S.rows(), c = S.cols();
  Tensor out = Tensor::zeros(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      mx = std::max(mx, S.data[i * c + j] + mask.data[i * c + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      denom += std::exp(S.data[i * c + j] + mask.data[i * c + j] - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < c; ++j)
      out.data[i * c + j] = S.data[i * c + j] + mask.data[i * c + j] - lse;
  }
  const int si = scores.id;
  return t.emit(std::move(out), [si, P](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    std::vector<double>& gs = tp.grad_buf(si);
    const std::size_t r2 = P.rows(), c2 = P.cols();
    for (std::size_t i = 0; i < r2; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < c2; ++j) gsum += g[i * c2 + j];
      for (std::size_t j = 0; j < c2; ++j)
        gs[i * c2 + j] += g[i * c2 + j] - P.data[i * c2 + j] * gsum;
    }
  });
}

// Negative log-likelihood of one target per row of log-probabilities,
// summed over rows (or averaged with mean=true).
inline Var nll_from_log_probs(Var log_probs, const std::vector<std::size_t>& targets,
                              bool mean = false) {
  Tape& t = *log_probs.tape;
  const Tensor& L = detail::val(log_probs);
  if (targets.size() != L.rows())
    throw DimensionError("nll: " + std::to_string(targets.size()) + " targets for " +
                         shape_str(L.shape));
  const std::size_t c = L.cols();
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= c)
      throw DimensionError("nll target " + std::to_string(targets[i]) + " out of " +
                           shape_str(L.shape));
    loss -= L.data[i * c + targets[i]];
  }
  const double denom = mean ? static_cast<double>(targets.size()) : 1.0;
  loss /= denom;
  const int li = log_probs.id;
  return t.emit(Tensor::scalar(loss), [li, targets, c, denom](Tape& tp, int self) {
    const double g = tp.grad_buf(self)[0];
    std::vector<double>& gl = tp.grad_buf(li);
    const double w = g / denom;
    for (std::size_t i = 0; i < targets.size(); ++i) gl[i * c + targets[i]] -= w;
  });
}

// ---- reductions / scalars -----------------------------------------------------

inline Var sum_all(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = detail::val(a);
  double s = 0.0;
  for (double x : A.data) s += x;
  const int ai = a.id;
  return t.emit(Tensor::scalar(s), [ai](Tape& tp, int self) {
    const double g = tp.grad_buf(self)[0];
    std::vector<double>& ga = tp.grad_buf(ai);
    for (double& x : ga) x += g;
  });
}

inline Var mean_all(Var a) {
  const double n = static_cast<double>(detail::val(a).numel());
  return scale(sum_all(a), 1.0 / n);
}

inline Var pick(Var a, std::size_t r, std::size_t c) {
  Tape& t = *a.tape;
  const Tensor& A = detail::val(a);
  if (r >= A.rows() || c >= A.cols())
    throw DimensionError("pick (" + std::to_string(r) + "," + std::to_string(c) + ") out of " +
                         shape_str(A.shape));
  const std::size_t cols = A.cols();
  const int ai = a.id;
  return t.emit(Tensor::scalar(A.at(r, c)), [ai, r, c, cols](Tape& tp, int self) {
    tp.grad_buf(ai)[r * cols + c] += tp.grad_buf(self)[0];
  });
}

// ---- fused model-specific primitives --------------------------------------------

// H = s*L + (1-s)*G with s = sigmoid(L+G), computed as G + s*(L-G) and
// clamped into [min(L,G), max(L,G)] so L == G gives H == L bit-exactly and
// random inputs stay inside the elementwise envelope.
inline Var gated_fusion(Var l, Var g) {
  Tape& t = detail::tape_of(l, g);
  const Tensor& L = detail::val(l);
  const Tensor& G = detail::val(g);
  if (!same_shape(L, G))
    throw DimensionError("gated_fusion shapes " + shape_str(L.shape) + " vs " +
                         shape_str(G.shape));
  Tensor out = Tensor::zeros(L.rows(), L.cols());
  Tensor gate = Tensor::zeros(L.rows(), L.cols());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double lv = L.data[i], gv = G.data[i];
    const double s = 1.0 / (1.0 + std::exp(-(lv + gv)));
    gate.data[i] = s;
    double h = gv + s * (lv - gv);
    const double lo = std::min(lv, gv), hi = std::max(lv, gv);
    if (h < lo) h = lo;
    if (h > hi) h = hi;
    out.data[i] = h;
  }
  const int li = l.id, gi = g.id;
  return t.emit(std::move(out), [li, gi, gate](Tape& tp, int self) {
    const std::vector<double>& gr = tp.grad_buf(self);
    const Tensor& L2 = tp.value(li);
    const Tensor& G2 = tp.value(gi);
    std::vector<double>& gl = tp.grad_buf(li);
    std::vector<double>& gg = tp.grad_buf(gi);
    for (std::size_t i = 0; i < gr.size(); ++i) {
      const double s = gate.data[i];
      const double ds = s * (1.0 - s) * (L2.data[i] - G2.data[i]);
      gl[i] += gr[i] * (s + ds);
      gg[i] += gr[i] * (1.0 - s + ds);
    }
  });
}

// Additive pointer scores: out[t, i] = sum_d v[d] * tanh(A[i, d] + B[t, d])
// with A the n x d candidate projections, B the T x d state projections and
// v a d x 1 mixing vector.
inline Var additive_scores(Var a, Var b, Var v) {
  Tape& t = detail::tape_of(a, b);
  detail::tape_of(b, v);
  const Tensor& A = detail::val(a);
  const Tensor& B = detail::val(b);
  const Tensor& V = detail::val(v);
  const std::size_t n = A.rows(), d = A.cols(), T = B.rows();
  if (B.cols() != d || V.rows() != d || V.cols() != 1)
    throw DimensionError("additive_scores dims: " + shape_str(A.shape) + ", " +
                         shape_str(B.shape) + ", " + shape_str(V.shape));
  Tensor out = Tensor::zeros(T, n);
  for (std::size_t tt = 0; tt < T; ++tt)
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t dd = 0; dd < d; ++dd)
        s += V.data[dd] * std::tanh(A.data[i * d + dd] + B.data[tt * d + dd]);
      out.data[tt * n + i] = s;
    }
  const int ai = a.id, bi = b.id, vi = v.id;
  return t.emit(std::move(out), [ai, bi, vi, n, d, T](Tape& tp, int self) {
    const std::vector<double>& g = tp.grad_buf(self);
    const Tensor& A2 = tp.value(ai);
    const Tensor& B2 = tp.value(bi);
    const Tensor& V2 = tp.value(vi);
    std::vector<double>& ga = tp.grad_buf(ai);
    std::vector<double>& gb = tp.grad_buf(bi);
    std::vector<double>& gv = tp.grad_buf(vi);
    for (std::size_t tt = 0; tt < T; ++tt)
      for (std::size_t i = 0; i < n; ++i) {
        const double go = g[tt * n + i];
        if (go == 0.0) continue;
        for (std::size_t dd = 0; dd < d; ++dd) {
          const double u = std::tanh(A2.data[i * d + dd] + B2.data[tt * d + dd]);
          const double du = go * V2.data[dd] * (1.0 - u * u);
          ga[i * d + dd] += du;
          gb[tt * d + dd] += du;
          gv[dd] += go * u;
        }
      }
  });
}

// ---- composition helpers --------------------------------------------------------

// x * W + b with b broadcast across rows.
inline Var linear(Var x, Var w, Var b) { return add(matmul(x, w), b); }

}  // namespace ops
}  // namespace skh

#endif  // SKH_TAPE_HPP
