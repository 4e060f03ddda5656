#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "racer/nn/tensor.hpp"

namespace racer::nn {

/// Eager tape-based reverse-mode autodiff. Ops append nodes; backward()
/// replays the tape in reverse. Node handles are plain indices.
template <typename T>
class Tape {
 public:
  using Mat =
      Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapM = Eigen::Map<Mat>;
  using CMapM = Eigen::Map<const Mat>;

  int input(Tensor<T> value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Tensor<T>& value(int id) const { return nodes_[id].value; }
  const Tensor<T>& grad(int id) const { return nodes_[id].grad; }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // ---- primitive ops -------------------------------------------------

  /// x: [N, I], w: [I, O], b: [O] -> [N, O]
  int dense(int x, int w, int b) {
    check_rank(x, 2, "dense x");
    check_rank(w, 2, "dense w");
    check_rank(b, 1, "dense b");
    int N = nodes_[x].value.dim(0), I = nodes_[x].value.dim(1);
    int O = nodes_[w].value.dim(1);
    if (nodes_[w].value.dim(0) != I || nodes_[b].value.dim(0) != O)
      throw std::invalid_argument("dense: shape mismatch");

    Tensor<T> out({N, O});
    CMapM X(nodes_[x].value.data.data(), N, I);
    CMapM W(nodes_[w].value.data.data(), I, O);
    MapM Y(out.data.data(), N, O);
    Y.noalias() = X * W;
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < O; ++c) out.data[r * O + c] += nodes_[b].value[c];

    return emit(std::move(out), {x, w, b}, [=](Tape& t, int self) {
      CMapM G(t.nodes_[self].grad.data.data(), N, O);
      if (t.nodes_[x].requires_grad) {
        CMapM W2(t.nodes_[w].value.data.data(), I, O);
        MapM GX(t.nodes_[x].grad.data.data(), N, I);
        GX.noalias() += G * W2.transpose();
      }
      if (t.nodes_[w].requires_grad) {
        CMapM X2(t.nodes_[x].value.data.data(), N, I);
        MapM GW(t.nodes_[w].grad.data.data(), I, O);
        GW.noalias() += X2.transpose() * G;
      }
      if (t.nodes_[b].requires_grad) {
        for (int r = 0; r < N; ++r)
          for (int c = 0; c < O; ++c) t.nodes_[b].grad[c] += G(r, c);
      }
    });
  }

  /// x: [N, C, H, W], w: [F, C, K, K], b: [F]; stride/pad configurable.
  int conv2d(int x, int w, int b, int stride, int pad) {
    check_rank(x, 4, "conv2d x");
    check_rank(w, 4, "conv2d w");
    const auto& xs = nodes_[x].value.shape;
    const auto& ws = nodes_[w].value.shape;
    int N = xs[0], C = xs[1], H = xs[2], Wd = xs[3];
    int F = ws[0], K = ws[2];
    if (ws[1] != C || ws[3] != K || nodes_[b].value.dim(0) != F)
      throw std::invalid_argument("conv2d: shape mismatch");
    int OH = (H + 2 * pad - K) / stride + 1;
    int OW = (Wd + 2 * pad - K) / stride + 1;
    if (OH <= 0 || OW <= 0) throw std::invalid_argument("conv2d: empty output");

    int ck = C * K * K;
    Tensor<T> out({N, F, OH, OW});
    Tensor<T> cols({N, ck, OH * OW});  // cached for backward
    CMapM Wm(nodes_[w].value.data.data(), F, ck);
    for (int n = 0; n < N; ++n) {
      T* col = &cols.data[static_cast<size_t>(n) * ck * OH * OW];
      im2col(&nodes_[x].value.data[static_cast<size_t>(n) * C * H * Wd], C, H,
             Wd, K, stride, pad, OH, OW, col);
      CMapM Col(col, ck, OH * OW);
      MapM Y(&out.data[static_cast<size_t>(n) * F * OH * OW], F, OH * OW);
      Y.noalias() = Wm * Col;
      for (int f = 0; f < F; ++f)
        Y.row(f).array() += nodes_[b].value[f];
    }

    auto cache = std::make_shared<Tensor<T>>(std::move(cols));
    return emit(std::move(out), {x, w, b}, [=](Tape& t, int self) {
      for (int n = 0; n < N; ++n) {
        CMapM G(&t.nodes_[self].grad.data[static_cast<size_t>(n) * F * OH * OW],
                F, OH * OW);
        const T* col = &cache->data[static_cast<size_t>(n) * ck * OH * OW];
        if (t.nodes_[w].requires_grad) {
          CMapM Col(col, ck, OH * OW);
          MapM GW(t.nodes_[w].grad.data.data(), F, ck);
          GW.noalias() += G * Col.transpose();
        }
        if (t.nodes_[b].requires_grad) {
          for (int f = 0; f < F; ++f)
            t.nodes_[b].grad[f] += G.row(f).sum();
        }
        if (t.nodes_[x].requires_grad) {
          Mat dcol(ck, OH * OW);
          CMapM Wm2(t.nodes_[w].value.data.data(), F, ck);
          dcol.noalias() = Wm2.transpose() * G;
          col2im(dcol.data(), C, H, Wd, K, stride, pad, OH, OW,
                 &t.nodes_[x].grad.data[static_cast<size_t>(n) * C * H * Wd]);
        }
      }
    });
  }

  /// When set, ReLU backward additionally drops negative upstream gradients
  /// (guided backpropagation).
  bool guided_backprop = false;

  int relu(int x) {
    Tensor<T> out(nodes_[x].value.shape);
    for (size_t i = 0; i < out.numel(); ++i) {
      T v = nodes_[x].value[i];
      out[i] = v > T(0) ? v : T(0);
    }
    return emit(std::move(out), {x}, [=](Tape& t, int self) {
      if (!t.nodes_[x].requires_grad) return;
      for (size_t i = 0; i < t.nodes_[x].grad.numel(); ++i) {
        T g = t.nodes_[self].grad[i];
        if (t.guided_backprop && g < T(0)) g = T(0);
        if (t.nodes_[x].value[i] > T(0)) t.nodes_[x].grad[i] += g;
      }
    });
  }
  int tanh_(int x) {
    return unary(x, [](T v) { return std::tanh(v); },
                 [](T, T y) { return T(1) - y * y; });
  }
  int exp_(int x) {
    return unary(x, [](T v) { return std::exp(v); },
                 [](T, T y) { return y; });
  }
  int log_(int x) {
    return unary(x, [](T v) { return std::log(v); },
                 [](T v, T) { return T(1) / v; });
  }
  int square(int x) {
    return unary(x, [](T v) { return v * v; },
                 [](T v, T) { return T(2) * v; });
  }
  int softplus(int x) {
    return unary(x,
                 [](T v) {
                   return v > T(20) ? v : std::log1p(std::exp(v));
                 },
                 [](T v, T) { return T(1) / (T(1) + std::exp(-v)); });
  }

  int add(int a, int b) {
    return binary(a, b, [](T u, T v) { return u + v; },
                  [](T, T) { return std::pair<T, T>(T(1), T(1)); });
  }
  int sub(int a, int b) {
    return binary(a, b, [](T u, T v) { return u - v; },
                  [](T, T) { return std::pair<T, T>(T(1), T(-1)); });
  }
  int mul(int a, int b) {
    return binary(a, b, [](T u, T v) { return u * v; },
                  [](T u, T v) { return std::pair<T, T>(v, u); });
  }
  int minimum(int a, int b) {
    return binary(a, b, [](T u, T v) { return u < v ? u : v; },
                  [](T u, T v) {
                    return u < v ? std::pair<T, T>(T(1), T(0))
                                 : std::pair<T, T>(T(0), T(1));
                  });
  }

  int scale(int x, T k) {
    return unary(x, [k](T v) { return k * v; }, [k](T, T) { return k; });
  }
  int add_scalar(int x, T k) {
    return unary(x, [k](T v) { return v + k; }, [](T, T) { return T(1); });
  }

  /// Concatenation along axis 1 of two [N, *] tensors.
  int concat(int a, int b) {
    check_rank(a, 2, "concat a");
    check_rank(b, 2, "concat b");
    int N = nodes_[a].value.dim(0);
    if (nodes_[b].value.dim(0) != N)
      throw std::invalid_argument("concat: batch mismatch");
    int A = nodes_[a].value.dim(1), B = nodes_[b].value.dim(1);
    Tensor<T> out({N, A + B});
    for (int r = 0; r < N; ++r) {
      for (int c = 0; c < A; ++c)
        out.data[r * (A + B) + c] = nodes_[a].value[r * A + c];
      for (int c = 0; c < B; ++c)
        out.data[r * (A + B) + A + c] = nodes_[b].value[r * B + c];
    }
    return emit(std::move(out), {a, b}, [=](Tape& t, int self) {
      const auto& g = t.nodes_[self].grad;
      for (int r = 0; r < N; ++r) {
        if (t.nodes_[a].requires_grad)
          for (int c = 0; c < A; ++c)
            t.nodes_[a].grad[r * A + c] += g[r * (A + B) + c];
        if (t.nodes_[b].requires_grad)
          for (int c = 0; c < B; ++c)
            t.nodes_[b].grad[r * B + c] += g[r * (A + B) + A + c];
      }
    });
  }

  /// Column slice [c0, c1) of an [N, C] tensor.
  int slice_cols(int x, int c0, int c1) {
    check_rank(x, 2, "slice_cols");
    int N = nodes_[x].value.dim(0), C = nodes_[x].value.dim(1);
    if (c0 < 0 || c1 > C || c0 >= c1)
      throw std::invalid_argument("slice_cols: bad range");
    int Wd = c1 - c0;
    Tensor<T> out({N, Wd});
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < Wd; ++c)
        out.data[r * Wd + c] = nodes_[x].value[r * C + c0 + c];
    return emit(std::move(out), {x}, [=](Tape& t, int self) {
      if (!t.nodes_[x].requires_grad) return;
      for (int r = 0; r < N; ++r)
        for (int c = 0; c < Wd; ++c)
          t.nodes_[x].grad[r * C + c0 + c] += t.nodes_[self].grad[r * Wd + c];
    });
  }

  /// Flatten [N, ...] to [N, rest].
  int flatten(int x) {
    int N = nodes_[x].value.dim(0);
    int rest = static_cast<int>(nodes_[x].value.numel()) / N;
    Tensor<T> out({N, rest}, nodes_[x].value.data);
    return emit(std::move(out), {x}, [=](Tape& t, int self) {
      if (!t.nodes_[x].requires_grad) return;
      for (size_t i = 0; i < t.nodes_[x].grad.numel(); ++i)
        t.nodes_[x].grad[i] += t.nodes_[self].grad[i];
    });
  }

  int sum(int x) {
    T s = T(0);
    for (T v : nodes_[x].value.data) s += v;
    Tensor<T> out({1});
    out[0] = s;
    return emit(std::move(out), {x}, [=](Tape& t, int self) {
      if (!t.nodes_[x].requires_grad) return;
      T g = t.nodes_[self].grad[0];
      for (size_t i = 0; i < t.nodes_[x].grad.numel(); ++i)
        t.nodes_[x].grad[i] += g;
    });
  }

  int mean(int x) {
    size_t n = nodes_[x].value.numel();
    return scale(sum(x), T(1) / static_cast<T>(n));
  }

  /// Row-wise mean of an [N, C] tensor -> [N, 1].
  int mean_rows(int x) {
    check_rank(x, 2, "mean_rows");
    int N = nodes_[x].value.dim(0), C = nodes_[x].value.dim(1);
    Tensor<T> out({N, 1});
    for (int r = 0; r < N; ++r) {
      T s = T(0);
      for (int c = 0; c < C; ++c) s += nodes_[x].value[r * C + c];
      out.data[r] = s / static_cast<T>(C);
    }
    return emit(std::move(out), {x}, [=](Tape& t, int self) {
      if (!t.nodes_[x].requires_grad) return;
      for (int r = 0; r < N; ++r) {
        T g = t.nodes_[self].grad[r] / static_cast<T>(C);
        for (int c = 0; c < C; ++c) t.nodes_[x].grad[r * C + c] += g;
      }
    });
  }

  /// Row-wise sum of an [N, C] tensor -> [N, 1].
  int sum_rows(int x) {
    check_rank(x, 2, "sum_rows");
    int N = nodes_[x].value.dim(0), C = nodes_[x].value.dim(1);
    Tensor<T> out({N, 1});
    for (int r = 0; r < N; ++r) {
      T s = T(0);
      for (int c = 0; c < C; ++c) s += nodes_[x].value[r * C + c];
      out.data[r] = s;
    }
    return emit(std::move(out), {x}, [=](Tape& t, int self) {
      if (!t.nodes_[x].requires_grad) return;
      for (int r = 0; r < N; ++r) {
        T g = t.nodes_[self].grad[r];
        for (int c = 0; c < C; ++c) t.nodes_[x].grad[r * C + c] += g;
      }
    });
  }

  /// Quantile regression loss with Huber kernel: predictions q [N, K] against
  /// constant targets z [N, J]; tau_i = (2i - 1) / (2K). kappa = 0 selects the
  /// pure pinball loss. Returns a scalar (mean over N, K, J).
  int quantile_huber_loss(int q, const Tensor<T>& z, T kappa) {
    check_rank(q, 2, "quantile_huber_loss q");
    int N = nodes_[q].value.dim(0), K = nodes_[q].value.dim(1);
    if (z.rank() != 2 || z.dim(0) != N)
      throw std::invalid_argument("quantile_huber_loss: target shape");
    int J = z.dim(1);
    T denom = static_cast<T>(N) * K * J;

    T loss = T(0);
    auto zc = std::make_shared<Tensor<T>>(z);
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < K; ++i) {
        T tau = (T(2) * i + T(1)) / (T(2) * K);
        T qv = nodes_[q].value[n * K + i];
        for (int j = 0; j < J; ++j) {
          T u = z[n * J + j] - qv;
          T w = std::abs(tau - (u < T(0) ? T(1) : T(0)));
          T hub = kappa > T(0)
                      ? (std::abs(u) <= kappa
                             ? T(0.5) * u * u
                             : kappa * (std::abs(u) - T(0.5) * kappa))
                      : std::abs(u);
          loss += w * (kappa > T(0) ? hub / kappa : hub);
        }
      }
    Tensor<T> out({1});
    out[0] = loss / denom;

    return emit(std::move(out), {q}, [=](Tape& t, int self) {
      if (!t.nodes_[q].requires_grad) return;
      T g0 = t.nodes_[self].grad[0] / denom;
      for (int n = 0; n < N; ++n)
        for (int i = 0; i < K; ++i) {
          T tau = (T(2) * i + T(1)) / (T(2) * K);
          T qv = t.nodes_[q].value[n * K + i];
          T acc = T(0);
          for (int j = 0; j < J; ++j) {
            T u = (*zc)[n * J + j] - qv;
            T w = std::abs(tau - (u < T(0) ? T(1) : T(0)));
            T dh_du;
            if (kappa > T(0))
              dh_du = std::clamp(u, -kappa, kappa) / kappa;
            else
              dh_du = u > T(0) ? T(1) : (u < T(0) ? T(-1) : T(0));
            acc += w * dh_du * T(-1);  // d u / d q = -1
          }
          t.nodes_[q].grad[n * K + i] += g0 * acc;
        }
    });
  }

  /// Seeds d(out)/d(out) = 1 and accumulates gradients into every node with
  /// requires_grad set (inputs included, for saliency).
  void backward(int out) {
    if (nodes_[out].value.numel() != 1)
      throw std::invalid_argument("backward: output must be scalar");
    for (auto& n : nodes_) {
      n.grad = Tensor<T>(n.value.shape);
    }
    nodes_[out].grad[0] = T(1);
    for (int i = out; i >= 0; --i) {
      if (nodes_[i].back) nodes_[i].back(*this, i);
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::function<void(Tape&, int)> back;
  };

  std::vector<Node> nodes_;

  void check_rank(int id, int r, const char* what) const {
    if (nodes_[id].value.rank() != r)
      throw std::invalid_argument(std::string(what) + ": wrong rank");
  }

  int emit(Tensor<T> value, std::initializer_list<int> parents,
           std::function<void(Tape&, int)> back) {
    bool rg = false;
    for (int p : parents) rg = rg || nodes_[p].requires_grad;
    Node n;
    n.value = std::move(value);
    n.requires_grad = rg;
    if (rg) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  template <typename F, typename DF>
  int unary(int x, F f, DF df) {
    Tensor<T> out(nodes_[x].value.shape);
    for (size_t i = 0; i < out.numel(); ++i)
      out[i] = f(nodes_[x].value[i]);
    return emit(std::move(out), {x}, [=](Tape& t, int self) {
      if (!t.nodes_[x].requires_grad) return;
      for (size_t i = 0; i < t.nodes_[x].grad.numel(); ++i)
        t.nodes_[x].grad[i] += t.nodes_[self].grad[i] *
                               df(t.nodes_[x].value[i], t.nodes_[self].value[i]);
    });
  }

  template <typename F, typename DF>
  int binary(int a, int b, F f, DF df) {
    if (!nodes_[a].value.same_shape(nodes_[b].value))
      throw std::invalid_argument("binary op: shape mismatch");
    Tensor<T> out(nodes_[a].value.shape);
    for (size_t i = 0; i < out.numel(); ++i)
      out[i] = f(nodes_[a].value[i], nodes_[b].value[i]);
    return emit(std::move(out), {a, b}, [=](Tape& t, int self) {
      for (size_t i = 0; i < t.nodes_[self].grad.numel(); ++i) {
        auto [da, db] = df(t.nodes_[a].value[i], t.nodes_[b].value[i]);
        if (t.nodes_[a].requires_grad)
          t.nodes_[a].grad[i] += t.nodes_[self].grad[i] * da;
        if (t.nodes_[b].requires_grad)
          t.nodes_[b].grad[i] += t.nodes_[self].grad[i] * db;
      }
    });
  }

  static void im2col(const T* x, int C, int H, int W, int K, int stride,
                     int pad, int OH, int OW, T* col) {
    for (int c = 0; c < C; ++c)
      for (int ki = 0; ki < K; ++ki)
        for (int kj = 0; kj < K; ++kj) {
          T* row = col + ((c * K + ki) * K + kj) * OH * OW;
          for (int oi = 0; oi < OH; ++oi) {
            int ii = oi * stride + ki - pad;
            for (int oj = 0; oj < OW; ++oj) {
              int jj = oj * stride + kj - pad;
              row[oi * OW + oj] =
                  (ii >= 0 && ii < H && jj >= 0 && jj < W)
                      ? x[(c * H + ii) * W + jj]
                      : T(0);
            }
          }
        }
  }

  static void col2im(const T* col, int C, int H, int W, int K, int stride,
                     int pad, int OH, int OW, T* x) {
    for (int c = 0; c < C; ++c)
      for (int ki = 0; ki < K; ++ki)
        for (int kj = 0; kj < K; ++kj) {
          const T* row = col + ((c * K + ki) * K + kj) * OH * OW;
          for (int oi = 0; oi < OH; ++oi) {
            int ii = oi * stride + ki - pad;
            if (ii < 0 || ii >= H) continue;
            for (int oj = 0; oj < OW; ++oj) {
              int jj = oj * stride + kj - pad;
              if (jj < 0 || jj >= W) continue;
              x[(c * H + ii) * W + jj] += row[oi * OW + oj];
            }
          }
        }
  }
};

}  // namespace racer::nn
