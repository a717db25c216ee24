// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <utility>

#include "eigen_maps.hpp"
#include "vitslim/kernels.hpp"

namespace vitslim::ag {

Var Tape::leaf(TensorD value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::record(TensorD value, std::initializer_list<Var> inputs,
                 Backward backward) {
  Node node;
  node.value = std::move(value);
  for (Var in : inputs) {
    if (!in.valid()) continue;
    if (in.id >= nodes_.size()) {
      throw ContractError("tape input refers to a later node");
    }
    node.inputs.push_back(in.id);
    node.requires_grad = node.requires_grad || nodes_[in.id].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

TensorD Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (node.grad.empty() && !node.value.empty()) return TensorD(node.value.shape());
  return node.grad;
}

TensorD& Tape::grad_buffer(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.shape() != node.value.shape()) {
    node.grad = TensorD(node.value.shape());
  }
  return node.grad;
}

void Tape::accumulate(Var v, TensorD g) {
  if (!requires_grad(v)) return;
  Node& node = nodes_.at(v.id);
  if (g.shape() != node.value.shape()) {
    throw DimensionError("gradient shape " + shape_str(g.shape()) + " does not match value " +
                         shape_str(node.value.shape()));
  }
  if (node.grad.empty()) {
    node.grad = std::move(g);
    return;
  }
  detail::map(node.grad) += detail::map(std::as_const(g));
}

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.id >= nodes_.size()) {
    throw ContractError("backward: invalid loss node");
  }
  if (nodes_[loss.id].value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(nodes_[loss.id].value.shape()));
  }
  for (auto& node : nodes_) node.grad = TensorD();
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.backward || node.grad.empty()) continue;
    // Callbacks only write to their inputs' buffers, which sit at smaller ids,
    // and nodes_ does not grow during the sweep, so the reference stays valid.
    node.backward(*this, node.grad);
  }
}

namespace {

void check_same(const TensorD& a, const TensorD& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch: " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void accumulate(Tape& tape, Var v, const TensorD& g) {
  if (!tape.requires_grad(v)) return;
  if (!tape.has_grad_buffer(v)) {
    tape.accumulate(v, g);
    return;
  }
  check_same(tape.value(v), g, "accumulate");
  detail::map(tape.grad_buffer(v)) += detail::map(g);
}

}  // namespace

Var matmul(Tape& tape, Var a, Var b) {
  TensorD out = vitslim::matmul(tape.value(a), tape.value(b));
  return tape.record(std::move(out), {a, b},
                     [a, b](Tape& t, const TensorD& g) {
                       if (t.requires_grad(a)) {
                         if (t.has_grad_buffer(a)) {
                           detail::map(t.grad_buffer(a)).noalias() +=
                               detail::map(g) * detail::map(t.value(b)).transpose();
                         } else {
                           t.accumulate(a, vitslim::matmul_nt(g, t.value(b)));
                         }
                       }
                       if (t.requires_grad(b)) {
                         if (t.has_grad_buffer(b)) {
                           detail::map(t.grad_buffer(b)).noalias() +=
                               detail::map(t.value(a)).transpose() * detail::map(g);
                         } else {
                           t.accumulate(b, vitslim::matmul_tn(t.value(a), g));
                         }
                       }
                     });
}

Var add(Tape& tape, Var a, Var b) {
  check_same(tape.value(a), tape.value(b), "add");
  TensorD out = vitslim::add(tape.value(a), tape.value(b));
  return tape.record(std::move(out), {a, b},
                     [a, b](Tape& t, const TensorD& g) {
                       accumulate(t, a, g);
                       accumulate(t, b, g);
                     });
}

Var add_bias(Tape& tape, Var x, Var bias) {
  TensorD out = tape.value(x);
  vitslim::add_row_bias(out, tape.value(bias));
  return tape.record(std::move(out), {x, bias},
                     [x, bias](Tape& t, const TensorD& g) {
                       accumulate(t, x, g);
                       if (t.requires_grad(bias)) {
                         TensorD& gb = t.grad_buffer(bias);
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           auto row = g.row(r);
                           for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
                         }
                       }
                     });
}

Var mul(Tape& tape, Var a, Var b) {
  const TensorD& va = tape.value(a);
  const TensorD& vb = tape.value(b);
  check_same(va, vb, "mul");
  TensorD out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  return tape.record(std::move(out), {a, b},
                     [a, b](Tape& t, const TensorD& g) {
                       const TensorD& va = t.value(a);
                       const TensorD& vb = t.value(b);
                       if (t.requires_grad(a)) {
                         TensorD& ga = t.grad_buffer(a);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
                       }
                       if (t.requires_grad(b)) {
                         TensorD& gb = t.grad_buffer(b);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
                       }
                     });
}

Var scale(Tape& tape, Var x, double factor) {
  TensorD out = tape.value(x);
  for (auto& v : out.data()) v *= factor;
  return tape.record(std::move(out), {x},
                     [x, factor](Tape& t, const TensorD& g) {
                       if (!t.requires_grad(x)) return;
                       TensorD& gx = t.grad_buffer(x);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
                     });
}

Var sum(Tape& tape, Var x) {
  double total = 0.0;
  for (double v : tape.value(x).data()) total += v;
  return tape.record(TensorD({1}, {total}), {x},
                     [x](Tape& t, const TensorD& g) {
                       if (!t.requires_grad(x)) return;
                       TensorD& gx = t.grad_buffer(x);
                       for (auto& v : gx.data()) v += g[0];
                     });
}

Var gelu(Tape& tape, Var x) {
  const TensorD& vx = tape.value(x);
  auto cdf = std::make_shared<std::vector<double>>(vx.size());
  TensorD out(vx.shape());
  for (std::size_t i = 0; i < vx.size(); ++i) {
    (*cdf)[i] = 0.5 * (1.0 + std::erf(vx[i] * (std::numbers::sqrt2 / 2)));
    out[i] = vx[i] * (*cdf)[i];
  }
  return tape.record(std::move(out), {x},
                     [x, cdf](Tape& t, const TensorD& g) {
                       if (!t.requires_grad(x)) return;
                       const TensorD& vx = t.value(x);
                       TensorD& gx = t.grad_buffer(x);
                       constexpr double kPdf = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double pdf = std::exp(-0.5 * vx[i] * vx[i]) * kPdf;
                         gx[i] += g[i] * ((*cdf)[i] + vx[i] * pdf);
                       }
                     });
}

Var softmax_rows(Tape& tape, Var x) {
  TensorD out = vitslim::softmax_rows(tape.value(x));
  auto saved = std::make_shared<TensorD>(out);
  return tape.record(std::move(out), {x},
                     [x, saved](Tape& t, const TensorD& g) {
                       if (!t.requires_grad(x)) return;
                       TensorD& gx = t.grad_buffer(x);
                       const TensorD& y = *saved;
                       for (std::size_t r = 0; r < y.rows(); ++r) {
                         auto yr = y.row(r);
                         auto gr = g.row(r);
                         double dot = 0.0;
                         for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
                         auto out = gx.row(r);
                         for (std::size_t c = 0; c < yr.size(); ++c) {
                           out[c] += yr[c] * (gr[c] - dot);
                         }
                       }
                     });
}

Var layer_norm(Tape& tape, Var x, Var gamma, Var beta) {
  const TensorD& vx = tape.value(x);
  const TensorD& vg = tape.value(gamma);
  const TensorD& vb = tape.value(beta);
  const std::size_t d = vx.cols();
  if (vg.size() != d || vb.size() != d) {
    throw DimensionError("layer_norm affine parameters must have length " +
                         std::to_string(d));
  }
  auto xhat = std::make_shared<TensorD>(vx.shape());
  auto rstd = std::make_shared<std::vector<double>>(vx.rows());
  TensorD out(vx.shape());
  for (std::size_t r = 0; r < vx.rows(); ++r) {
    auto in = vx.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    (*rstd)[r] = inv;
    auto xh = xhat->row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      xh[c] = (in[c] - mean) * inv;
      o[c] = xh[c] * vg[c] + vb[c];
    }
  }
  return tape.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, rstd](Tape& t, const TensorD& g) {
        const std::size_t d = g.cols();
        const TensorD& vg = t.value(gamma);
        if (t.requires_grad(gamma) || t.requires_grad(beta)) {
          TensorD* gg = t.requires_grad(gamma) ? &t.grad_buffer(gamma) : nullptr;
          TensorD* gb = t.requires_grad(beta) ? &t.grad_buffer(beta) : nullptr;
          for (std::size_t r = 0; r < g.rows(); ++r) {
            auto gr = g.row(r);
            auto xh = xhat->row(r);
            for (std::size_t c = 0; c < d; ++c) {
              if (gg) (*gg)[c] += gr[c] * xh[c];
              if (gb) (*gb)[c] += gr[c];
            }
          }
        }
        if (!t.requires_grad(x)) return;
        TensorD& gx = t.grad_buffer(x);
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto gr = g.row(r);
          auto xh = xhat->row(r);
          double mean_dx = 0.0;
          double mean_dx_xh = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            dxhat[c] = gr[c] * vg[c];
            mean_dx += dxhat[c];
            mean_dx_xh += dxhat[c] * xh[c];
          }
          mean_dx /= static_cast<double>(d);
          mean_dx_xh /= static_cast<double>(d);
          auto out = gx.row(r);
          for (std::size_t c = 0; c < d; ++c) {
            out[c] += (*rstd)[r] * (dxhat[c] - mean_dx - xh[c] * mean_dx_xh);
          }
        }
      });
}

Var attention(Tape& tape, Var q, Var k, Var v, Var beta, std::size_t batch,
              std::size_t seq, std::size_t heads) {
  const TensorD& vq = tape.value(q);
  const TensorD& vk = tape.value(k);
  const TensorD& vv = tape.value(v);
  check_same(vq, vk, "attention");
  check_same(vq, vv, "attention");
  const std::size_t d = vq.cols();
  if (vq.rows() != batch * seq) {
    throw DimensionError("attention: expected " + std::to_string(batch * seq) +
                         " rows, got " + std::to_string(vq.rows()));
  }
  const double* beta_ptr = nullptr;
  if (beta.valid()) {
    if (tape.value(beta).size() != batch * seq) {
      throw DimensionError("attention: beta length must be batch*seq");
    }
    beta_ptr = tape.value(beta).ptr();
  }
  const std::size_t block = heads * seq * seq;
  auto probs = std::make_shared<std::vector<double>>(batch * block);
  auto gates = std::make_shared<std::vector<double>>(batch * block);
  TensorD out(vq.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    AttentionArgs<double> args;
    args.q = vq.ptr() + b * seq * d;
    args.k = vk.ptr() + b * seq * d;
    args.v = vv.ptr() + b * seq * d;
    args.ld_in = d;
    args.beta = beta_ptr ? beta_ptr + b * seq : nullptr;
    args.out = out.ptr() + b * seq * d;
    args.ld_out = d;
    args.seq = seq;
    args.dim = d;
    args.heads = heads;
    args.probs = probs->data() + b * block;
    args.gates = gates->data() + b * block;
    attention_forward(args);
  }
  return tape.record(
      std::move(out), {q, k, v, beta},
      [=](Tape& t, const TensorD& g) {
        const TensorD& vq = t.value(q);
        const TensorD& vk = t.value(k);
        const TensorD& vv = t.value(v);
        const std::size_t dh = d / heads;
        const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
        TensorD* gq = t.requires_grad(q) ? &t.grad_buffer(q) : nullptr;
        TensorD* gk = t.requires_grad(k) ? &t.grad_buffer(k) : nullptr;
        TensorD* gv = t.requires_grad(v) ? &t.grad_buffer(v) : nullptr;
        TensorD* gbeta = t.requires_grad(beta) ? &t.grad_buffer(beta) : nullptr;
        using Mat = detail::RowMatrix<double>;
        using Strided = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;
        using StridedOut = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
        using Square = Eigen::Map<const Mat>;
        const auto n = static_cast<Eigen::Index>(seq);
        const auto cols = static_cast<Eigen::Index>(dh);
        const Eigen::OuterStride<> ld(static_cast<Eigen::Index>(d));
        Mat dw(n, n);
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t base = b * seq * d;
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = base + h * dh;
            const Square w(probs->data() + b * block + h * seq * seq, n, n);
            const Strided go(g.ptr() + off, n, cols, ld);
            const Strided vh(vv.ptr() + off, n, cols, ld);
            dw.noalias() = go * vh.transpose();
            if (gv) StridedOut(gv->ptr() + off, n, cols, ld).noalias() += w.transpose() * go;
            const Eigen::VectorXd wdw = w.cwiseProduct(dw).rowwise().sum();
            dw.colwise() -= wdw;  // centred
            if (gbeta) {
              const Square gate(gates->data() + b * block + h * seq * seq, n, n);
              Eigen::Map<Eigen::RowVectorXd>(gbeta->ptr() + b * seq, n) +=
                  gate.cwiseProduct(dw).colwise().sum();
            }
            dw = dw.cwiseProduct(w) * sc;
            if (gq) {
              StridedOut(gq->ptr() + off, n, cols, ld).noalias() +=
                  dw * Strided(vk.ptr() + off, n, cols, ld);
            }
            if (gk) {
              StridedOut(gk->ptr() + off, n, cols, ld).noalias() +=
                  dw.transpose() * Strided(vq.ptr() + off, n, cols, ld);
            }
          }
        }
      });
}

Var assemble_tokens(Tape& tape, Var patch_tokens, Var cls, Var pos,
                    std::size_t batch) {
  const TensorD& vp = tape.value(patch_tokens);
  const TensorD& vc = tape.value(cls);
  const TensorD& vpos = tape.value(pos);
  const std::size_t d = vp.cols();
  const std::size_t seq = vpos.rows();
  if (vc.size() != d || vpos.cols() != d || vp.rows() != batch * (seq - 1)) {
    throw DimensionError("assemble_tokens: inconsistent shapes " +
                         shape_str(vp.shape()) + ", " + shape_str(vc.shape()) +
                         ", " + shape_str(vpos.shape()));
  }
  TensorD out({batch * seq, d});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t s = 0; s < seq; ++s) {
      auto o = out.row(b * seq + s);
      auto p = vpos.row(s);
      if (s == 0) {
        for (std::size_t c = 0; c < d; ++c) o[c] = vc[c] + p[c];
      } else {
        auto src = vp.row(b * (seq - 1) + s - 1);
        for (std::size_t c = 0; c < d; ++c) o[c] = src[c] + p[c];
      }
    }
  }
  return tape.record(
      std::move(out), {patch_tokens, cls, pos},
      [=](Tape& t, const TensorD& g) {
        TensorD* gp = t.requires_grad(patch_tokens) ? &t.grad_buffer(patch_tokens) : nullptr;
        TensorD* gc = t.requires_grad(cls) ? &t.grad_buffer(cls) : nullptr;
        TensorD* gpos = t.requires_grad(pos) ? &t.grad_buffer(pos) : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t s = 0; s < seq; ++s) {
            auto gr = g.row(b * seq + s);
            if (gpos) {
              auto dst = gpos->row(s);
              for (std::size_t c = 0; c < d; ++c) dst[c] += gr[c];
            }
            if (s == 0) {
              if (gc) for (std::size_t c = 0; c < d; ++c) (*gc)[c] += gr[c];
            } else if (gp) {
              auto dst = gp->row(b * (seq - 1) + s - 1);
              for (std::size_t c = 0; c < d; ++c) dst[c] += gr[c];
            }
          }
        }
      });
}

Var gather_rows(Tape& tape, Var x, std::vector<std::size_t> rows) {
  const TensorD& vx = tape.value(x);
  const std::size_t d = vx.cols();
  TensorD out({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= vx.rows()) throw DimensionError("gather_rows: index out of range");
    auto src = vx.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return tape.record(std::move(out), {x},
                     [x, rows = std::move(rows)](Tape& t, const TensorD& g) {
                       if (!t.requires_grad(x)) return;
                       TensorD& gx = t.grad_buffer(x);
                       for (std::size_t r = 0; r < rows.size(); ++r) {
                         auto dst = gx.row(rows[r]);
                         auto src = g.row(r);
                         for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                       }
                     });
}

Var cross_entropy(Tape& tape, Var logits, std::span<const std::size_t> labels) {
  const TensorD& vl = tape.value(logits);
  if (vl.rows() != labels.size()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(vl.rows()) + " rows");
  }
  auto probs = std::make_shared<TensorD>(vitslim::softmax_rows(vl));
  std::vector<std::size_t> targets(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t r = 0; r < vl.rows(); ++r) {
    if (targets[r] >= vl.cols()) throw ContractError("cross_entropy: label out of range");
    auto row = vl.row(r);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - peak);
    total += -(row[targets[r]] - peak - std::log(z));
  }
  const double n = static_cast<double>(vl.rows());
  return tape.record(TensorD({1}, {total / n}), {logits},
                     [logits, probs, targets, n](Tape& t, const TensorD& g) {
                       if (!t.requires_grad(logits)) return;
                       TensorD& gl = t.grad_buffer(logits);
                       for (std::size_t r = 0; r < probs->rows(); ++r) {
                         auto p = probs->row(r);
                         auto dst = gl.row(r);
                         for (std::size_t c = 0; c < p.size(); ++c) {
                           const double onehot = c == targets[r] ? 1.0 : 0.0;
                           dst[c] += g[0] * (p[c] - onehot) / n;
                         }
                       }
                     });
}

Var bilinear_cls_score(Tape& tape, Var xn, Var weight, std::size_t batch,
                       std::size_t seq) {
  const TensorD& vx = tape.value(xn);
  const TensorD& vw = tape.value(weight);
  const std::size_t d = vx.cols();
  if (vw.rows() != d || vw.cols() != d || vx.rows() != batch * seq || seq < 2) {
    throw DimensionError("bilinear_cls_score: inconsistent shapes");
  }
  // u_b = W^T xcls_b, s_bi = u_b . x_bi
  auto u = std::make_shared<TensorD>(TensorD({batch, d}));
  TensorD out({batch, seq - 1});
  for (std::size_t b = 0; b < batch; ++b) {
    auto cls = vx.row(b * seq);
    auto ub = u->row(b);
    for (std::size_t r = 0; r < d; ++r) {
      const double cr = cls[r];
      auto wr = vw.row(r);
      for (std::size_t c = 0; c < d; ++c) ub[c] += cr * wr[c];
    }
    for (std::size_t i = 1; i < seq; ++i) {
      auto xi = vx.row(b * seq + i);
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += ub[c] * xi[c];
      out.at(b, i - 1) = s;
    }
  }
  return tape.record(
      std::move(out), {xn, weight},
      [=](Tape& t, const TensorD& g) {
        const TensorD& vx = t.value(xn);
        const TensorD& vw = t.value(weight);
        TensorD* gx = t.requires_grad(xn) ? &t.grad_buffer(xn) : nullptr;
        TensorD* gw = t.requires_grad(weight) ? &t.grad_buffer(weight) : nullptr;
        std::vector<double> du(d);
        for (std::size_t b = 0; b < batch; ++b) {
          std::fill(du.begin(), du.end(), 0.0);
          auto ub = u->row(b);
          for (std::size_t i = 1; i < seq; ++i) {
            const double gs = g.at(b, i - 1);
            auto xi = vx.row(b * seq + i);
            for (std::size_t c = 0; c < d; ++c) du[c] += gs * xi[c];
            if (gx) {
              auto dst = gx->row(b * seq + i);
              for (std::size_t c = 0; c < d; ++c) dst[c] += gs * ub[c];
            }
          }
          auto cls = vx.row(b * seq);
          if (gw) {
            for (std::size_t r = 0; r < d; ++r) {
              auto dst = gw->row(r);
              for (std::size_t c = 0; c < d; ++c) dst[c] += cls[r] * du[c];
            }
          }
          if (gx) {
            auto dst = gx->row(b * seq);
            for (std::size_t r = 0; r < d; ++r) {
              auto wr = vw.row(r);
              double acc = 0.0;
              for (std::size_t c = 0; c < d; ++c) acc += wr[c] * du[c];
              dst[r] += acc;
            }
          }
        }
      });
}

Var renormalize_rows(Tape& tape, Var scores, double mu, double sigma,
                     double std_floor) {
  const TensorD& vs = tape.value(scores);
  const std::size_t n = vs.cols();
  if (n < 2) throw ContractError("renormalize_rows: need at least 2 scores per row");
  auto centered = std::make_shared<TensorD>(vs.shape());
  auto stds = std::make_shared<std::vector<double>>(vs.rows());
  TensorD out(vs.shape());
  for (std::size_t r = 0; r < vs.rows(); ++r) {
    auto s = vs.row(r);
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    (*stds)[r] = sd;
    const double denom = std::max(sd, std_floor);
    auto z = centered->row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      z[c] = s[c] - mean;
      o[c] = z[c] / denom * sigma + mu;
    }
  }
  return tape.record(
      std::move(out), {scores},
      [=](Tape& t, const TensorD& g) {
        if (!t.requires_grad(scores)) return;
        TensorD& gs = t.grad_buffer(scores);
        const double nn = static_cast<double>(n);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto gr = g.row(r);
          auto z = centered->row(r);
          const double sd = (*stds)[r];
          const bool floored = sd <= std_floor;
          const double c = sigma / (floored ? std_floor : sd);
          double mean_g = 0.0;
          double gz = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            mean_g += gr[i];
            gz += gr[i] * z[i];
          }
          mean_g /= nn;
          auto dst = gs.row(r);
          for (std::size_t k = 0; k < n; ++k) {
            double v = c * (gr[k] - mean_g);
            if (!floored) v -= sigma * z[k] * gz / (nn * sd * sd * sd);
            dst[k] += v;
          }
        }
      });
}

Var sigmoid_beta(Tape& tape, Var lives, double layer, double temperature,
                 bool paper_literal) {
  const TensorD& vt = tape.value(lives);
  const std::size_t batch = vt.rows();
  const std::size_t n = vt.cols();
  const double sign = paper_literal ? -1.0 : 1.0;
  TensorD out({batch * (n + 1)});
  for (std::size_t b = 0; b < batch; ++b) {
    out[b * (n + 1)] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double arg = sign * temperature * (layer - vt.at(b, i));
      out[b * (n + 1) + 1 + i] = 1.0 / (1.0 + std::exp(arg));
    }
  }
  auto saved = std::make_shared<TensorD>(out);
  return tape.record(
      std::move(out), {lives},
      [=](Tape& t, const TensorD& g) {
        if (!t.requires_grad(lives)) return;
        TensorD& gl = t.grad_buffer(lives);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < n; ++i) {
            const double beta = (*saved)[b * (n + 1) + 1 + i];
            // d/dtau of 1/(1+exp(sign*U*(t - tau))) = sign*U*beta*(1-beta)
            gl.at(b, i) += g[b * (n + 1) + 1 + i] * sign * temperature * beta * (1.0 - beta);
          }
        }
      });
}

}  // namespace vitslim::ag
