#include "golfsig/nn/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "golfsig/util/error.hpp"

namespace golfsig::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

MatMap mat(NDArray& a) {
  return MatMap(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}
ConstMatMap mat(const NDArray& a) {
  return ConstMatMap(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}
MatMap mat(double* p, std::size_t r, std::size_t c) {
  return MatMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
ConstMatMap mat(const double* p, std::size_t r, std::size_t c) {
  return ConstMatMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

Eigen::Map<const Eigen::RowVectorXd> rowvec(const double* p, std::size_t n) {
  return Eigen::Map<const Eigen::RowVectorXd>(p, static_cast<Eigen::Index>(n));
}

void same_size(const Var& a, const Var& b, const char* op) {
  if (a.value().size() != b.value().size()) {
    throw DimensionError(std::string(op) + ": operand shapes " + shape_string(a.value().shape()) + " and " +
                         shape_string(b.value().shape()) + " differ");
  }
}

Shape matrix_shape(std::size_t r, std::size_t c) { return Shape{r, c}; }

void accumulate(Graph& g, const Var& v, const NDArray& delta) {
  if (!g.requires_grad(v)) return;
  auto& gr = g.grad(v);
  for (std::size_t i = 0; i < delta.size(); ++i) gr[i] += delta[i];
}

template <typename Fwd, typename Deriv>
Var elementwise(Var x, Fwd fwd, Deriv deriv) {
  const auto& xv = x.value();
  NDArray out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return x.graph().record(std::move(out), {x}, [x, deriv](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(x)) return;
    const auto& xv = g.value(x);
    auto& gx = g.grad(x);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += dy[i] * deriv(xv[i]);
  });
}

double sigmoid_scalar(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Var matmul(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner axis mismatch, left " + shape_string(av.shape()) + " right " +
                         shape_string(bv.shape()));
  }
  NDArray out(matrix_shape(av.rows(), bv.cols()));
  mat(out).noalias() = mat(av) * mat(bv);
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const NDArray& dy) {
    if (g.requires_grad(a)) mat(g.grad(a)).noalias() += mat(dy) * mat(g.value(b)).transpose();
    if (g.requires_grad(b)) mat(g.grad(b)).noalias() += mat(g.value(a)).transpose() * mat(dy);
  });
}

Var linear(Var x, Var weight, std::optional<Var> bias) {
  const auto& xv = x.value();
  const auto& wv = weight.value();
  if (wv.ndim() != 2 || xv.cols() != wv.dim(0)) {
    throw DimensionError("linear: input axis 1 has width " + std::to_string(xv.cols()) + " but weight is " +
                         shape_string(wv.shape()));
  }
  NDArray out(matrix_shape(xv.rows(), wv.dim(1)));
  mat(out).noalias() = mat(xv) * mat(wv);
  if (bias) {
    const auto& bv = bias->value();
    if (bv.size() != wv.dim(1)) throw DimensionError("linear: bias length differs from output width");
    mat(out).rowwise() += rowvec(bv.data(), bv.size());
  }
  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(*bias);
  return x.graph().record(std::move(out), parents, [x, weight, bias](Graph& g, const NDArray& dy) {
    if (g.requires_grad(x)) mat(g.grad(x)).noalias() += mat(dy) * mat(g.value(weight)).transpose();
    if (g.requires_grad(weight)) mat(g.grad(weight)).noalias() += mat(g.value(x)).transpose() * mat(dy);
    if (bias && g.requires_grad(*bias)) {
      auto& gb = g.grad(*bias);
      mat(gb.data(), 1, gb.size()) += mat(dy).colwise().sum();
    }
  });
}

Var grouped_linear(Var x, Var weight, Var bias, const std::vector<std::size_t>& group, std::size_t groups) {
  const auto& xv = x.value();
  const auto& wv = weight.value();
  const std::size_t n = xv.rows(), in = xv.cols(), out_w = wv.cols();
  if (groups == 0 || wv.rows() != groups * in)
    throw DimensionError("grouped_linear: weight is " + shape_string(wv.shape()) + ", expected " +
                         std::to_string(groups * in) + " rows");
  if (bias.value().size() != groups * out_w) throw DimensionError("grouped_linear: bias must be groups x out");
  if (group.size() != n) throw DimensionError("grouped_linear: one group index per row required");
  auto rows = std::make_shared<std::vector<std::vector<std::size_t>>>(groups);
  for (std::size_t i = 0; i < n; ++i) {
    if (group[i] >= groups) throw DimensionError("grouped_linear: group index out of range");
    (*rows)[group[i]].push_back(i);
  }
  NDArray out(matrix_shape(n, out_w));
  const auto& bv = bias.value();
  for (std::size_t k = 0; k < groups; ++k) {
    const auto& r = (*rows)[k];
    if (r.empty()) continue;
    RowMat xs(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(in));
    for (std::size_t i = 0; i < r.size(); ++i) xs.row(static_cast<Eigen::Index>(i)) = mat(xv).row(static_cast<Eigen::Index>(r[i]));
    RowMat ys = xs * mat(wv.data() + k * in * out_w, in, out_w);
    ys.rowwise() += rowvec(bv.data() + k * out_w, out_w);
    for (std::size_t i = 0; i < r.size(); ++i) mat(out).row(static_cast<Eigen::Index>(r[i])) = ys.row(static_cast<Eigen::Index>(i));
  }
  return x.graph().record(std::move(out), {x, weight, bias}, [x, weight, bias, rows](Graph& g, const NDArray& dy) {
    const auto& xv = g.value(x);
    const auto& wv = g.value(weight);
    const std::size_t in = xv.cols(), out_w = wv.cols();
    for (std::size_t k = 0; k < rows->size(); ++k) {
      const auto& r = (*rows)[k];
      if (r.empty()) continue;
      RowMat d(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(out_w));
      for (std::size_t i = 0; i < r.size(); ++i) d.row(static_cast<Eigen::Index>(i)) = mat(dy).row(static_cast<Eigen::Index>(r[i]));
      const auto wk = mat(wv.data() + k * in * out_w, in, out_w);
      if (g.requires_grad(x)) {
        RowMat dx = d * wk.transpose();
        auto gx = mat(g.grad(x));
        for (std::size_t i = 0; i < r.size(); ++i) gx.row(static_cast<Eigen::Index>(r[i])) += dx.row(static_cast<Eigen::Index>(i));
      }
      if (g.requires_grad(weight)) {
        RowMat xs(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(in));
        for (std::size_t i = 0; i < r.size(); ++i) xs.row(static_cast<Eigen::Index>(i)) = mat(xv).row(static_cast<Eigen::Index>(r[i]));
        mat(g.grad(weight).data() + k * in * out_w, in, out_w).noalias() += xs.transpose() * d;
      }
      if (g.requires_grad(bias)) mat(g.grad(bias).data() + k * out_w, 1, out_w) += d.colwise().sum();
    }
  });
}

Var add(Var a, Var b) {
  same_size(a, b, "add");
  NDArray out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const NDArray& dy) {
    accumulate(g, a, dy);
    accumulate(g, b, dy);
  });
}

Var sub(Var a, Var b) {
  same_size(a, b, "sub");
  NDArray out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const NDArray& dy) {
    accumulate(g, a, dy);
    if (g.requires_grad(b)) {
      auto& gb = g.grad(b);
      for (std::size_t i = 0; i < dy.size(); ++i) gb[i] -= dy[i];
    }
  });
}

Var mul(Var a, Var b) {
  same_size(a, b, "mul");
  NDArray out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const NDArray& dy) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    if (g.requires_grad(a)) {
      auto& ga = g.grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * bv[i];
    }
    if (g.requires_grad(b)) {
      auto& gb = g.grad(b);
      for (std::size_t i = 0; i < dy.size(); ++i) gb[i] += dy[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  NDArray out = a.value();
  for (auto& v : out.values()) v *= s;
  return a.graph().record(std::move(out), {a}, [a, s](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(a)) return;
    auto& ga = g.grad(a);
    for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += s * dy[i];
  });
}

Var add_row(Var x, Var v) {
  const auto& xv = x.value();
  const auto& vv = v.value();
  if (vv.size() != xv.cols()) throw DimensionError("add_row: vector length differs from axis 1 width");
  NDArray out = xv;
  mat(out).rowwise() += rowvec(vv.data(), vv.size());
  return x.graph().record(std::move(out), {x, v}, [x, v](Graph& g, const NDArray& dy) {
    accumulate(g, x, dy);
    if (g.requires_grad(v)) {
      auto& gv = g.grad(v);
      mat(gv.data(), 1, gv.size()) += mat(dy).colwise().sum();
    }
  });
}

Var mul_row(Var x, Var v) {
  const auto& xv = x.value();
  const auto& vv = v.value();
  if (vv.size() != xv.cols()) throw DimensionError("mul_row: vector length differs from axis 1 width");
  NDArray out = xv;
  const std::size_t c = xv.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vv[i % c];
  return x.graph().record(std::move(out), {x, v}, [x, v](Graph& g, const NDArray& dy) {
    const auto& xv = g.value(x);
    const auto& vv = g.value(v);
    const std::size_t c = xv.cols();
    if (g.requires_grad(x)) {
      auto& gx = g.grad(x);
      for (std::size_t i = 0; i < dy.size(); ++i) gx[i] += dy[i] * vv[i % c];
    }
    if (g.requires_grad(v)) {
      auto& gv = g.grad(v);
      for (std::size_t i = 0; i < dy.size(); ++i) gv[i % c] += dy[i] * xv[i];
    }
  });
}

Var silu(Var x) {
  return elementwise(
      x, [](double v) { return v * sigmoid_scalar(v); },
      [](double v) {
        const double s = sigmoid_scalar(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Var relu(Var x) {
  return elementwise(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  return elementwise(
      x, [](double v) { return std::tanh(v); },
      [](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
}

Var sigmoid(Var x) {
  return elementwise(x, sigmoid_scalar, [](double v) {
    const double s = sigmoid_scalar(v);
    return s * (1.0 - s);
  });
}

Var softmax_rows(Var x) {
  const auto& xv = x.value();
  NDArray out(xv.shape());
  const std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = xv.data() + i * c;
    double* o = out.data() + i * c;
    const double mx = *std::max_element(in, in + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < c; ++j) o[j] /= s;
  }
  NDArray p = out;
  return x.graph().record(std::move(out), {x}, [x, p = std::move(p)](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad(x);
    const std::size_t r = p.rows(), c = p.cols();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += dy[i * c + j] * p[i * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += p[i * c + j] * (dy[i * c + j] - dot);
    }
  });
}

Var layernorm(Var x, Var gamma, Var beta, double eps) {
  const auto& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (gamma.value().size() != c || beta.value().size() != c) {
    throw DimensionError("layernorm: affine parameters must match axis " + std::to_string(xv.ndim() - 1) +
                         " width " + std::to_string(c));
  }
  NDArray xhat(xv.shape());
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = xv.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += in[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) xhat[i * c + j] = (in[j] - mean) * inv_std[i];
  }
  NDArray out(xv.shape());
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xhat[i] * gv[i % c] + bv[i % c];
  return x.graph().record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, const NDArray& dy) {
        const std::size_t c = xhat.cols(), r = xhat.rows();
        const auto& gv = g.value(gamma);
        if (g.requires_grad(gamma)) {
          auto& gg = g.grad(gamma);
          for (std::size_t i = 0; i < dy.size(); ++i) gg[i % c] += dy[i] * xhat[i];
        }
        if (g.requires_grad(beta)) {
          auto& gb = g.grad(beta);
          for (std::size_t i = 0; i < dy.size(); ++i) gb[i % c] += dy[i];
        }
        if (!g.requires_grad(x)) return;
        auto& gx = g.grad(x);
        std::vector<double> dxhat(c);
        for (std::size_t i = 0; i < r; ++i) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            dxhat[j] = dy[i * c + j] * gv[j];
            m1 += dxhat[j];
            m2 += dxhat[j] * xhat[i * c + j];
          }
          m1 /= static_cast<double>(c);
          m2 /= static_cast<double>(c);
          for (std::size_t j = 0; j < c; ++j) {
            gx[i * c + j] += inv_std[i] * (dxhat[j] - m1 - xhat[i * c + j] * m2);
          }
        }
      });
}

Var dropout(Var x, double rate) {
  auto& g = x.graph();
  if (!g.training() || rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
  const auto& xv = x.value();
  NDArray keep(xv.shape());
  const double s = 1.0 / (1.0 - rate);
  for (auto& k : keep.values()) k = g.rng().uniform() >= rate ? s : 0.0;
  NDArray out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= keep[i];
  return g.record(std::move(out), {x}, [x, keep = std::move(keep)](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) gx[i] += dy[i] * keep[i];
  });
}

Var embedding(const std::vector<int>& ids, Var table) {
  const auto& tv = table.value();
  const std::size_t vocab = tv.rows(), d = tv.cols();
  NDArray out(matrix_shape(ids.size(), d));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw ValidationError("embedding: token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                            std::to_string(vocab));
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  return table.graph().record(std::move(out), {table}, [ids, table](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(table)) return;
    auto& gt = g.grad(table);
    const std::size_t d = gt.cols();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      double* row = gt.data() + static_cast<std::size_t>(ids[i]) * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += dy[i * d + j];
    }
  });
}

Var time_mix(Var x, Var weight, Var bias, std::size_t length) {
  const auto& xv = x.value();
  const auto& wv = weight.value();
  if (wv.rows() != length || wv.cols() != length) {
    throw DimensionError("time_mix: weight must be " + std::to_string(length) + "x" + std::to_string(length) +
                         ", got " + shape_string(wv.shape()));
  }
  if (bias.value().size() != length) throw DimensionError("time_mix: bias length differs from window");
  if (xv.rows() % length != 0) {
    throw DimensionError("time_mix: axis 0 extent " + std::to_string(xv.rows()) + " is not a multiple of window " +
                         std::to_string(length));
  }
  const std::size_t batch = xv.rows() / length, d = xv.cols();
  NDArray out(xv.shape());
  const auto& bv = bias.value();
  for (std::size_t b = 0; b < batch; ++b) {
    auto y = mat(out.data() + b * length * d, length, d);
    y.noalias() = mat(wv) * mat(xv.data() + b * length * d, length, d);
    for (std::size_t i = 0; i < length; ++i) y.row(static_cast<Eigen::Index>(i)).array() += bv[i];
  }
  return x.graph().record(std::move(out), {x, weight, bias}, [x, weight, bias, length](Graph& g, const NDArray& dy) {
    const auto& xv = g.value(x);
    const std::size_t batch = xv.rows() / length, d = xv.cols();
    for (std::size_t b = 0; b < batch; ++b) {
      auto dyb = mat(dy.data() + b * length * d, length, d);
      if (g.requires_grad(x)) {
        mat(g.grad(x).data() + b * length * d, length, d).noalias() += mat(g.value(weight)).transpose() * dyb;
      }
      if (g.requires_grad(weight)) {
        mat(g.grad(weight)).noalias() += dyb * mat(xv.data() + b * length * d, length, d).transpose();
      }
      if (g.requires_grad(bias)) {
        auto& gb = g.grad(bias);
        for (std::size_t i = 0; i < length; ++i) gb[i] += dyb.row(static_cast<Eigen::Index>(i)).sum();
      }
    }
  });
}

Var attention(Var q, Var k, Var v, std::size_t batch, std::size_t seq, std::size_t heads,
              const std::vector<std::uint8_t>* blocked) {
  const auto& qv = q.value();
  const std::size_t width = qv.cols();
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention: " + std::to_string(heads) + " heads do not divide width " + std::to_string(width));
  }
  if (qv.rows() != batch * seq || k.value().rows() != batch * seq || v.value().rows() != batch * seq ||
      k.value().cols() != width || v.value().cols() != width) {
    throw DimensionError("attention: q/k/v must all be (batch*seq) x width");
  }
  if (blocked && blocked->size() != seq * seq) throw DimensionError("attention: mask must be seq x seq");
  const std::size_t dh = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  // Probabilities per (batch, head), seq x seq, kept for the backward pass.
  std::vector<RowMat> probs(batch * heads);
  NDArray out(matrix_shape(batch * seq, width));
  const auto& kv = k.value();
  const auto& vv = v.value();
  const Eigen::Index S = static_cast<Eigen::Index>(seq), D = static_cast<Eigen::Index>(dh);
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(width));
  using Strided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
  using StridedMut = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = b * seq * width + h * dh;
      Strided Q(qv.data() + off, S, D, stride), K(kv.data() + off, S, D, stride), V(vv.data() + off, S, D, stride);
      RowMat scores = (Q * K.transpose()) * inv_sqrt;
      for (Eigen::Index i = 0; i < S; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < S; ++j) {
          if (blocked && (*blocked)[static_cast<std::size_t>(i * S + j)]) scores(i, j) = -std::numeric_limits<double>::infinity();
          mx = std::max(mx, scores(i, j));
        }
        if (!std::isfinite(mx)) {
          scores.row(i).setZero();
          continue;
        }
        double s = 0.0;
        for (Eigen::Index j = 0; j < S; ++j) s += (scores(i, j) = std::exp(scores(i, j) - mx));
        scores.row(i) /= s;
      }
      StridedMut O(out.data() + off, S, D, stride);
      O.noalias() = scores * V;
      probs[b * heads + h] = std::move(scores);
    }
  }
  return q.graph().record(
      std::move(out), {q, k, v},
      [q, k, v, batch, seq, heads, dh, inv_sqrt, width, probs = std::move(probs)](Graph& g, const NDArray& dy) {
        const Eigen::Index S = static_cast<Eigen::Index>(seq), D = static_cast<Eigen::Index>(dh);
        const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(width));
        using Strided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
        using StridedMut = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
        const bool gq = g.requires_grad(q), gk = g.requires_grad(k), gv = g.requires_grad(v);
        double* dq = gq ? g.grad(q).data() : nullptr;
        double* dk = gk ? g.grad(k).data() : nullptr;
        double* dv = gv ? g.grad(v).data() : nullptr;
        const auto& qv = g.value(q);
        const auto& kv = g.value(k);
        const auto& vv = g.value(v);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = b * seq * width + h * dh;
            const RowMat& P = probs[b * heads + h];
            Strided dO(dy.data() + off, S, D, stride);
            Strided Q(qv.data() + off, S, D, stride), K(kv.data() + off, S, D, stride),
                V(vv.data() + off, S, D, stride);
            if (gv) StridedMut(dv + off, S, D, stride).noalias() += P.transpose() * dO;
            if (!gq && !gk) continue;
            RowMat dP = dO * V.transpose();
            RowMat dS = P.cwiseProduct(dP);
            Eigen::VectorXd rs = dS.rowwise().sum();
            dS -= P.cwiseProduct(rs.replicate(1, S));
            dS *= inv_sqrt;
            if (gq) StridedMut(dq + off, S, D, stride).noalias() += dS * K;
            if (gk) StridedMut(dk + off, S, D, stride).noalias() += dS.transpose() * Q;
          }
        }
      });
}

Var lstm(Var x, Var w_input, Var w_hidden, Var bias, std::size_t batch, std::size_t steps, bool reverse) {
  const auto& xv = x.value();
  const std::size_t in = xv.cols();
  const std::size_t hidden = w_hidden.value().rows();
  if (w_input.value().rows() != in || w_input.value().cols() != 4 * hidden ||
      w_hidden.value().cols() != 4 * hidden || bias.value().size() != 4 * hidden) {
    throw DimensionError("lstm: weights must be in x 4H, H x 4H and bias 4H");
  }
  if (xv.rows() != batch * steps) throw DimensionError("lstm: axis 0 must be batch*steps");
  const std::size_t H = hidden, G = 4 * hidden;
  // Per step: activated gates (B x 4H), cell state (B x H), tanh(cell) (B x H).
  std::vector<RowMat> gates(steps), cells(steps), tanh_cells(steps);
  NDArray out(matrix_shape(batch * steps, H));
  RowMat h_prev = RowMat::Zero(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(H));
  RowMat c_prev = h_prev;
  const auto Wx = mat(w_input.value());
  const auto Wh = mat(w_hidden.value());
  const auto bvec = rowvec(bias.value().data(), G);
  const Eigen::Index B = static_cast<Eigen::Index>(batch), Hi = static_cast<Eigen::Index>(H);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    RowMat xt(B, static_cast<Eigen::Index>(in));
    for (std::size_t b = 0; b < batch; ++b) {
      xt.row(static_cast<Eigen::Index>(b)) = mat(xv.data() + (b * steps + t) * in, 1, in);
    }
    RowMat a = xt * Wx + h_prev * Wh;
    a.rowwise() += bvec;
    for (Eigen::Index r = 0; r < B; ++r) {
      for (Eigen::Index j = 0; j < Hi; ++j) {
        a(r, j) = sigmoid_scalar(a(r, j));
        a(r, Hi + j) = sigmoid_scalar(a(r, Hi + j));
        a(r, 2 * Hi + j) = std::tanh(a(r, 2 * Hi + j));
        a(r, 3 * Hi + j) = sigmoid_scalar(a(r, 3 * Hi + j));
      }
    }
    RowMat c = a.middleCols(Hi, Hi).cwiseProduct(c_prev) + a.leftCols(Hi).cwiseProduct(a.middleCols(2 * Hi, Hi));
    RowMat tc = c.array().tanh().matrix();
    RowMat h = a.rightCols(Hi).cwiseProduct(tc);
    for (std::size_t b = 0; b < batch; ++b) {
      mat(out.data() + (b * steps + t) * H, 1, H) = h.row(static_cast<Eigen::Index>(b));
    }
    gates[s] = std::move(a);
    cells[s] = c;
    tanh_cells[s] = std::move(tc);
    h_prev = std::move(h);
    c_prev = std::move(c);
  }
  return x.graph().record(
      std::move(out), {x, w_input, w_hidden, bias},
      [=, gates = std::move(gates), cells = std::move(cells), tanh_cells = std::move(tanh_cells)](
          Graph& g, const NDArray& dy) {
        const Eigen::Index B = static_cast<Eigen::Index>(batch), Hi = static_cast<Eigen::Index>(H);
        const auto& xv = g.value(x);
        const auto Wx = mat(g.value(w_input));
        const auto Wh = mat(g.value(w_hidden));
        RowMat dh_next = RowMat::Zero(B, Hi), dc_next = RowMat::Zero(B, Hi);
        RowMat dWx = RowMat::Zero(Wx.rows(), Wx.cols()), dWh = RowMat::Zero(Wh.rows(), Wh.cols());
        Eigen::RowVectorXd db = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(G));
        const bool gx = g.requires_grad(x);
        for (std::size_t s = steps; s-- > 0;) {
          const std::size_t t = reverse ? steps - 1 - s : s;
          const RowMat& a = gates[s];
          RowMat dh = dh_next;
          for (std::size_t b = 0; b < batch; ++b) {
            dh.row(static_cast<Eigen::Index>(b)) += mat(dy.data() + (b * steps + t) * H, 1, H);
          }
          const auto ig = a.leftCols(Hi), fg = a.middleCols(Hi, Hi), cg = a.middleCols(2 * Hi, Hi),
                     og = a.rightCols(Hi);
          const RowMat& tc = tanh_cells[s];
          RowMat c_prev = s > 0 ? cells[s - 1] : RowMat::Zero(B, Hi);
          RowMat h_prev = s > 0 ? RowMat(og.rows(), og.cols()) : RowMat::Zero(B, Hi);
          if (s > 0) h_prev = gates[s - 1].rightCols(Hi).cwiseProduct(tanh_cells[s - 1]);
          RowMat dc = dh.cwiseProduct(og).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;
          RowMat da(B, static_cast<Eigen::Index>(G));
          da.leftCols(Hi) = dc.cwiseProduct(cg).cwiseProduct((ig.array() * (1.0 - ig.array())).matrix());
          da.middleCols(Hi, Hi) = dc.cwiseProduct(c_prev).cwiseProduct((fg.array() * (1.0 - fg.array())).matrix());
          da.middleCols(2 * Hi, Hi) = dc.cwiseProduct(ig).cwiseProduct((1.0 - cg.array().square()).matrix());
          da.rightCols(Hi) = dh.cwiseProduct(tc).cwiseProduct((og.array() * (1.0 - og.array())).matrix());
          dc_next = dc.cwiseProduct(fg);
          dh_next.noalias() = da * Wh.transpose();
          RowMat xt(B, Wx.rows());
          for (std::size_t b = 0; b < batch; ++b) {
            xt.row(static_cast<Eigen::Index>(b)) = mat(xv.data() + (b * steps + t) * xv.cols(), 1, xv.cols());
          }
          dWx.noalias() += xt.transpose() * da;
          dWh.noalias() += h_prev.transpose() * da;
          db += da.colwise().sum();
          if (gx) {
            RowMat dxt = da * Wx.transpose();
            auto& gxv = g.grad(x);
            for (std::size_t b = 0; b < batch; ++b) {
              mat(gxv.data() + (b * steps + t) * xv.cols(), 1, xv.cols()) += dxt.row(static_cast<Eigen::Index>(b));
            }
          }
        }
        if (g.requires_grad(w_input)) mat(g.grad(w_input)) += dWx;
        if (g.requires_grad(w_hidden)) mat(g.grad(w_hidden)) += dWh;
        if (g.requires_grad(bias)) mat(g.grad(bias).data(), 1, G) += db;
      });
}

Var batchnorm(Var x, Var gamma, Var beta, const NDArray& running_mean, const NDArray& running_var,
              BatchNormUpdate* update, double momentum, double eps) {
  const auto& xv = x.value();
  const std::size_t n = xv.rows(), c = xv.cols();
  if (gamma.value().size() != c || beta.value().size() != c || running_mean.size() != c || running_var.size() != c) {
    throw DimensionError("batchnorm: parameters must match axis 1 width " + std::to_string(c));
  }
  auto& g = x.graph();
  std::vector<double> mean(c, 0.0), inv_std(c, 0.0);
  const bool batch_stats = g.training();
  if (batch_stats) {
    if (n < 2) throw DimensionError("batchnorm: training needs at least 2 rows");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) mean[j] += xv[i * c + j];
    for (auto& m : mean) m /= static_cast<double>(n);
    std::vector<double> var(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) var[j] += (xv[i * c + j] - mean[j]) * (xv[i * c + j] - mean[j]);
    for (std::size_t j = 0; j < c; ++j) {
      const double biased = var[j] / static_cast<double>(n);
      inv_std[j] = 1.0 / std::sqrt(biased + eps);
    }
    if (update) {
      update->mean = running_mean;
      update->var = running_var;
      for (std::size_t j = 0; j < c; ++j) {
        update->mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mean[j];
        update->var[j] = (1.0 - momentum) * running_var[j] + momentum * var[j] / static_cast<double>(n - 1);
      }
    }
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      mean[j] = running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
    }
  }
  NDArray xhat(xv.shape());
  NDArray out(xv.shape());
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (xv[i * c + j] - mean[j]) * inv_std[j];
      out[i * c + j] = xhat[i * c + j] * gv[j] + bv[j];
    }
  }
  return g.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, batch_stats, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Graph& g, const NDArray& dy) {
                    const std::size_t n = xhat.rows(), c = xhat.cols();
                    const auto& gv = g.value(gamma);
                    if (g.requires_grad(gamma)) {
                      auto& gg = g.grad(gamma);
                      for (std::size_t i = 0; i < dy.size(); ++i) gg[i % c] += dy[i] * xhat[i];
                    }
                    if (g.requires_grad(beta)) {
                      auto& gb = g.grad(beta);
                      for (std::size_t i = 0; i < dy.size(); ++i) gb[i % c] += dy[i];
                    }
                    if (!g.requires_grad(x)) return;
                    auto& gx = g.grad(x);
                    for (std::size_t j = 0; j < c; ++j) {
                      if (!batch_stats) {
                        for (std::size_t i = 0; i < n; ++i) gx[i * c + j] += dy[i * c + j] * gv[j] * inv_std[j];
                        continue;
                      }
                      double m1 = 0.0, m2 = 0.0;
                      for (std::size_t i = 0; i < n; ++i) {
                        const double d = dy[i * c + j] * gv[j];
                        m1 += d;
                        m2 += d * xhat[i * c + j];
                      }
                      m1 /= static_cast<double>(n);
                      m2 /= static_cast<double>(n);
                      for (std::size_t i = 0; i < n; ++i) {
                        gx[i * c + j] += inv_std[j] * (dy[i * c + j] * gv[j] - m1 - xhat[i * c + j] * m2);
                      }
                    }
                  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rows() != r) throw DimensionError("concat_cols: inputs disagree on axis 0");
    widths.push_back(p.cols());
    total += p.cols();
  }
  NDArray out(matrix_shape(r, total));
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    const std::size_t w = pv.cols();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(pv.data() + i * w, w, out.data() + i * total + off);
    off += w;
  }
  return parts.front().graph().record(std::move(out), parts, [parts, widths, total](Graph& g, const NDArray& dy) {
    std::size_t off = 0;
    const std::size_t r = dy.rows();
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const std::size_t w = widths[k];
      if (g.requires_grad(parts[k])) {
        auto& gp = g.grad(parts[k]);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += dy[i * total + off + j];
      }
      off += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw DimensionError("concat_rows: inputs disagree on axis 1");
    total += p.rows();
  }
  NDArray out(matrix_shape(total, c));
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + off);
    off += p.value().size();
  }
  return parts.front().graph().record(std::move(out), parts, [parts](Graph& g, const NDArray& dy) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t n = p.value().size();
      if (g.requires_grad(p)) {
        auto& gp = g.grad(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += dy[off + i];
      }
      off += n;
    }
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t width) {
  const auto& xv = x.value();
  const std::size_t c = xv.cols(), r = xv.rows();
  if (start + width > c) throw DimensionError("slice_cols: range exceeds axis 1 width " + std::to_string(c));
  NDArray out(matrix_shape(r, width));
  for (std::size_t i = 0; i < r; ++i) std::copy_n(xv.data() + i * c + start, width, out.data() + i * width);
  return x.graph().record(std::move(out), {x}, [x, start, width, c](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad(x);
    const std::size_t r = dy.rows();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < width; ++j) gx[i * c + start + j] += dy[i * width + j];
  });
}

Var gather_rows(Var x, const std::vector<std::size_t>& rows) {
  const auto& xv = x.value();
  const std::size_t c = xv.cols();
  NDArray out(matrix_shape(rows.size(), c));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(xv.data() + rows[i] * c, c, out.data() + i * c);
  }
  return x.graph().record(std::move(out), {x}, [x, rows](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad(x);
    const std::size_t c = gx.cols();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gx[rows[i] * c + j] += dy[i * c + j];
  });
}

Var reshape(Var x, Shape shape) {
  NDArray out = x.value().reshaped(std::move(shape));
  return x.graph().record(std::move(out), {x}, [x](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) gx[i] += dy[i];
  });
}

Var segment_mean(Var x, std::size_t batch, std::size_t seq) {
  const auto& xv = x.value();
  if (xv.rows() != batch * seq || seq == 0) throw DimensionError("segment_mean: axis 0 must be batch*seq");
  const std::size_t c = xv.cols();
  NDArray out(matrix_shape(batch, c));
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < seq; ++t)
      for (std::size_t j = 0; j < c; ++j) out[b * c + j] += xv[(b * seq + t) * c + j];
  for (auto& v : out.values()) v /= static_cast<double>(seq);
  return x.graph().record(std::move(out), {x}, [x, batch, seq](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad(x);
    const std::size_t c = gx.cols();
    const double inv = 1.0 / static_cast<double>(seq);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < seq; ++t)
        for (std::size_t j = 0; j < c; ++j) gx[(b * seq + t) * c + j] += dy[b * c + j] * inv;
  });
}

Var frame_diff(Var x, std::size_t batch, std::size_t steps) {
  const auto& xv = x.value();
  if (xv.rows() != batch * steps || steps < 2) throw DimensionError("frame_diff: need batch*steps rows, steps >= 2");
  const std::size_t c = xv.cols(), n = steps - 1;
  NDArray out(matrix_shape(batch * n, c));
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t j = 0; j < c; ++j)
        out[(b * n + t) * c + j] = xv[(b * steps + t + 1) * c + j] - xv[(b * steps + t) * c + j];
  return x.graph().record(std::move(out), {x}, [x, batch, steps](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad(x);
    const std::size_t c = gx.cols(), n = steps - 1;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < c; ++j) {
          const double d = dy[(b * n + t) * c + j];
          gx[(b * steps + t + 1) * c + j] += d;
          gx[(b * steps + t) * c + j] -= d;
        }
  });
}

Var sum_all(Var x) {
  return x.graph().record(NDArray::scalar(x.value().sum()), {x}, [x](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad(x);
    for (auto& v : gx.values()) v += dy[0];
  });
}

Var mean_all(Var x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum_all(x), 1.0 / n);
}

Var mse_loss(Var pred, Var target) {
  auto d = sub(pred, target);
  return mean_all(mul(d, d));
}

Var l1_loss(Var pred, Var target) {
  same_size(pred, target, "l1_loss");
  auto d = sub(pred, target);
  auto a = elementwise(d, [](double v) { return std::abs(v); },
                       [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  return mean_all(a);
}

Var smooth_l1_loss(Var pred, Var target, double beta) {
  same_size(pred, target, "smooth_l1_loss");
  auto d = sub(pred, target);
  auto s = elementwise(
      d,
      [beta](double v) {
        const double a = std::abs(v);
        return a < beta ? 0.5 * v * v / beta : a - 0.5 * beta;
      },
      [beta](double v) {
        const double a = std::abs(v);
        if (a < beta) return v / beta;
        return v > 0.0 ? 1.0 : -1.0;
      });
  return mean_all(s);
}

Var cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<double>* class_weights) {
  const auto& lv = logits.value();
  const std::size_t r = lv.rows(), c = lv.cols();
  if (targets.size() != r) throw DimensionError("cross_entropy: one target per row required");
  if (class_weights && class_weights->size() != c) throw DimensionError("cross_entropy: one weight per class");
  NDArray probs(lv.shape());
  double total = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = lv.data() + i * c;
    double* p = probs.data() + i * c;
    const double mx = *std::max_element(in, in + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (p[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < c; ++j) p[j] /= s;
    const int y = targets[i];
    if (y < 0) continue;
    if (static_cast<std::size_t>(y) >= c) throw ValidationError("cross_entropy: target class out of range");
    const double w = class_weights ? (*class_weights)[static_cast<std::size_t>(y)] : 1.0;
    total += w * (mx + std::log(s) - in[y]);
    norm += w;
  }
  const double loss = norm > 0.0 ? total / norm : 0.0;
  std::vector<double> weights = class_weights ? *class_weights : std::vector<double>{};
  return logits.graph().record(
      NDArray::scalar(loss), {logits},
      [logits, targets, weights, norm, probs = std::move(probs)](Graph& g, const NDArray& dy) {
        if (!g.requires_grad(logits) || norm <= 0.0) return;
        auto& gl = g.grad(logits);
        const std::size_t c = probs.cols();
        for (std::size_t i = 0; i < targets.size(); ++i) {
          const int y = targets[i];
          if (y < 0) continue;
          const double w = (weights.empty() ? 1.0 : weights[static_cast<std::size_t>(y)]) * dy[0] / norm;
          for (std::size_t j = 0; j < c; ++j) gl[i * c + j] += w * probs[i * c + j];
          gl[i * c + static_cast<std::size_t>(y)] -= w;
        }
      });
}

Var fsq_bound(Var z, const std::vector<double>& half) {
  const auto& zv = z.value();
  if (zv.cols() != half.size()) throw DimensionError("fsq_bound: latent width differs from level count");
  NDArray out(zv.shape());
  const std::size_t c = half.size();
  for (std::size_t i = 0; i < zv.size(); ++i) out[i] = half[i % c] * std::tanh(zv[i]);
  return z.graph().record(std::move(out), {z}, [z, half](Graph& g, const NDArray& dy) {
    if (!g.requires_grad(z)) return;
    const auto& zv = g.value(z);
    auto& gz = g.grad(z);
    const std::size_t c = half.size();
    for (std::size_t i = 0; i < zv.size(); ++i) {
      const double t = std::tanh(zv[i]);
      gz[i] += dy[i] * half[i % c] * (1.0 - t * t);
    }
  });
}

Var round_ste(Var u, const std::vector<double>& shift) {
  const auto& uv = u.value();
  if (uv.cols() != shift.size()) throw DimensionError("round_ste: latent width differs from level count");
  NDArray out(uv.shape());
  const std::size_t c = shift.size();
  for (std::size_t i = 0; i < uv.size(); ++i) out[i] = std::round(uv[i] - shift[i % c]) + shift[i % c];
  return u.graph().record(std::move(out), {u}, [u](Graph& g, const NDArray& dy) { accumulate(g, u, dy); });
}

}  // namespace golfsig::nn
