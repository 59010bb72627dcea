#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/nnet/tensor.hpp"
#include "nbrescore/rng.hpp"
#include "nbrescore/training/mwer.hpp"

namespace nbrescore::nnet {

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  bool valid() const { return index_ != kInvalid; }
  std::size_t index() const { return index_; }

 private:
  friend class Tape;
  explicit Var(std::size_t i) : index_(i) {}
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t index_ = kInvalid;
};

struct TapeOptions {
  bool train = false;   // enables dropout
  bool record = true;   // keep backward closures; off for score-only passes
  Rng* rng = nullptr;   // dropout source, required when train is set
};

/// Reverse-mode differentiation tape.
///
/// Every op appends one node holding its forward value and, when recording,
/// a closure that maps the node's output gradient to its inputs. Parameters
/// are read in place from the ParameterSet (never copied onto the tape);
/// their gradients go straight into the GradientSet passed to backward().
/// Frozen parameters are skipped. A tape is single-use and single-threaded;
/// run one tape per utterance to parallelize.
class Tape {
 public:
  explicit Tape(const ParameterSet& params, TapeOptions opts = {})
      : params_(&params), opts_(opts) {
    if (opts_.train && !opts_.rng) throw std::invalid_argument("training tape needs an rng");
  }

  bool training() const { return opts_.train; }
  const ParameterSet& params() const { return *params_; }
  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(Var v) const { return nodes_.at(v.index()).value; }
  double scalar(Var v) const {
    const auto& m = value(v);
    if (m.size() != 1) throw std::logic_error("scalar() on a non-scalar value");
    return m(0, 0);
  }

  Var constant(Matrix m) { return push(std::move(m), nullptr); }

  // Rows of a parameter table selected by ids.
  Var embed(ParamId table, std::span<const TokenId> ids) {
    const Matrix& t = params_->value(table);
    Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] >= static_cast<TokenId>(t.rows())) {
        throw std::out_of_range("embedding id out of range");
      }
      out.row(static_cast<Eigen::Index>(r)) = t.row(ids[r]);
    }
    if (!wants_grad(table)) return constant(std::move(out));
    std::vector<TokenId> keep(ids.begin(), ids.end());
    return push(std::move(out), [table, keep = std::move(keep)](Tape& tape, const Matrix& g) {
      Matrix& dt = tape.sink_->at(table);
      for (std::size_t r = 0; r < keep.size(); ++r) {
        dt.row(keep[r]) += g.row(static_cast<Eigen::Index>(r));
      }
    });
  }

  // The first n rows of a parameter table (positional embeddings).
  Var leading_rows(ParamId table, std::size_t n) {
    const Matrix& t = params_->value(table);
    if (n > static_cast<std::size_t>(t.rows())) throw std::out_of_range("sequence too long");
    Matrix out = t.topRows(static_cast<Eigen::Index>(n));
    if (!wants_grad(table)) return constant(std::move(out));
    return push(std::move(out), [table](Tape& tape, const Matrix& g) {
      tape.sink_->at(table).topRows(g.rows()) += g;
    });
  }

  Var add(Var a, Var b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
      throw std::invalid_argument("add: shape mismatch");
    }
    Matrix out = va + vb;
    return push(std::move(out), [a, b](Tape& tape, const Matrix& g) {
      tape.accumulate(a, g);
      tape.accumulate(b, g);
    });
  }

  // Adds the single-row parameter `row` to every row r with mask[r] != 0.
  // Rows with a zero mask are passed through untouched, so an all-zero
  // mask reproduces the input bit for bit.
  Var add_row_where(Var x, ParamId row, std::span<const std::uint8_t> mask) {
    const Matrix& vx = value(x);
    if (mask.size() != static_cast<std::size_t>(vx.rows())) {
      throw std::invalid_argument("add_row_where: mask length mismatch");
    }
    const Matrix& r = params_->value(row);
    Matrix out = vx;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) out.row(static_cast<Eigen::Index>(i)) += r.row(0);
    }
    std::vector<std::uint8_t> keep(mask.begin(), mask.end());
    const bool grad_row = wants_grad(row);
    return push(std::move(out), [x, row, grad_row, keep = std::move(keep)](Tape& tape,
                                                                           const Matrix& g) {
      tape.accumulate(x, g);
      if (!grad_row) return;
      Matrix* dr = nullptr;
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        if (!dr) dr = &tape.sink_->at(row);
        dr->row(0) += g.row(static_cast<Eigen::Index>(i));
      }
    });
  }

  // x * W + b with W (in x out) and b (1 x out).
  Var linear(Var x, ParamId weight, ParamId bias) {
    const Matrix& vx = value(x);
    const Matrix& w = params_->value(weight);
    const Matrix& b = params_->value(bias);
    Matrix out = vx * w;
    out.rowwise() += b.row(0);
    const bool gw = wants_grad(weight);
    const bool gb = wants_grad(bias);
    return push(std::move(out), [x, weight, bias, gw, gb](Tape& tape, const Matrix& g) {
      const Matrix& w = tape.params_->value(weight);
      if (gw) tape.sink_->at(weight).noalias() += tape.value(x).transpose() * g;
      if (gb) tape.sink_->at(bias).row(0) += g.colwise().sum();
      tape.accumulate(x, g * w.transpose());
    });
  }

  // Row-wise layer normalization with learnable gain and bias (1 x d each).
  Var layer_norm(Var x, ParamId gain, ParamId bias, double eps = 1e-12) {
    const Matrix& vx = value(x);
    const Matrix& gm = params_->value(gain);
    const Matrix& bm = params_->value(bias);
    const auto d = static_cast<double>(vx.cols());
    Matrix xhat(vx.rows(), vx.cols());
    Eigen::VectorXd inv_std(vx.rows());
    for (Eigen::Index r = 0; r < vx.rows(); ++r) {
      const double mean = vx.row(r).sum() / d;
      const auto centered = vx.row(r).array() - mean;
      const double var = centered.square().sum() / d;
      inv_std(r) = 1.0 / std::sqrt(var + eps);
      xhat.row(r) = centered * inv_std(r);
    }
    Matrix out = (xhat.array().rowwise() * gm.row(0).array()).rowwise() + bm.row(0).array();
    const bool gg = wants_grad(gain);
    const bool gb = wants_grad(bias);
    return push(std::move(out), [x, gain, bias, gg, gb, xhat = std::move(xhat),
                                 inv_std = std::move(inv_std), d](Tape& tape, const Matrix& g) {
      const Matrix& gm = tape.params_->value(gain);
      if (gg) tape.sink_->at(gain).row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
      if (gb) tape.sink_->at(bias).row(0) += g.colwise().sum();
      Matrix dxhat = g.array().rowwise() * gm.row(0).array();
      Matrix dx(dxhat.rows(), dxhat.cols());
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).sum() / d;
        const double m2 = dxhat.row(r).dot(xhat.row(r)) / d;
        dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
      }
      tape.accumulate(x, dx);
    });
  }

  // Exact (erf) GELU.
  Var gelu(Var x) {
    const Matrix& vx = value(x);
    Matrix out = vx.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
    return push(std::move(out), [x](Tape& tape, const Matrix& g) {
      const Matrix& vx = tape.value(x);
      Matrix d = vx.unaryExpr([](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
      tape.accumulate(x, g.cwiseProduct(d));
    });
  }

  // Inverted dropout; identity outside training.
  Var dropout(Var x, double rate) {
    if (!opts_.train || rate <= 0.0) return x;
    const Matrix& vx = value(x);
    const double keep = 1.0 - rate;
    Matrix mask(vx.rows(), vx.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      mask.data()[i] = opts_.rng->uniform() < keep ? 1.0 / keep : 0.0;
    }
    Matrix out = vx.cwiseProduct(mask);
    return push(std::move(out), [x, mask = std::move(mask)](Tape& tape, const Matrix& g) {
      tape.accumulate(x, g.cwiseProduct(mask));
    });
  }

  /// Multi-head scaled dot-product attention without masking.
  ///
  /// q is (Lq x d), k and v are (Lk x d); d is split into `heads` equal
  /// slices. Returns the concatenated per-head outputs (Lq x d).
  Var attention(Var q, Var k, Var v, std::size_t heads) {
    const Matrix& vq = value(q);
    const Matrix& vk = value(k);
    const Matrix& vv = value(v);
    const Eigen::Index d = vq.cols();
    if (heads == 0 || d % static_cast<Eigen::Index>(heads) != 0 || vk.cols() != d ||
        vv.cols() != d || vk.rows() != vv.rows()) {
      throw std::invalid_argument("attention: shape mismatch");
    }
    const Eigen::Index hd = d / static_cast<Eigen::Index>(heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    Matrix out(vq.rows(), d);
    std::vector<Matrix> probs(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const Eigen::Index c = static_cast<Eigen::Index>(h) * hd;
      Matrix s = (vq.middleCols(c, hd) * vk.middleCols(c, hd).transpose()) * scale;
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
      }
      out.middleCols(c, hd).noalias() = s * vv.middleCols(c, hd);
      probs[h] = std::move(s);
    }
    return push(std::move(out), [q, k, v, hd, scale, probs = std::move(probs)](Tape& tape,
                                                                               const Matrix& g) {
      const Matrix& vq = tape.value(q);
      const Matrix& vk = tape.value(k);
      const Matrix& vv = tape.value(v);
      Matrix dq = Matrix::Zero(vq.rows(), vq.cols());
      Matrix dk = Matrix::Zero(vk.rows(), vk.cols());
      Matrix dv = Matrix::Zero(vv.rows(), vv.cols());
      for (std::size_t h = 0; h < probs.size(); ++h) {
        const Eigen::Index c = static_cast<Eigen::Index>(h) * hd;
        const Matrix& p = probs[h];
        const auto go = g.middleCols(c, hd);
        dv.middleCols(c, hd).noalias() = p.transpose() * go;
        Matrix dp = go * vv.middleCols(c, hd).transpose();
        Matrix ds(p.rows(), p.cols());
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
          const double dot = dp.row(r).dot(p.row(r));
          ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
        }
        ds *= scale;
        dq.middleCols(c, hd).noalias() = ds * vk.middleCols(c, hd);
        dk.middleCols(c, hd).noalias() = ds.transpose() * vq.middleCols(c, hd);
      }
      tape.accumulate(q, dq);
      tape.accumulate(k, dk);
      tape.accumulate(v, dv);
    });
  }

  Var select_row(Var x, std::size_t r) {
    const Matrix& vx = value(x);
    if (r >= static_cast<std::size_t>(vx.rows())) throw std::out_of_range("select_row");
    Matrix out = vx.row(static_cast<Eigen::Index>(r));
    return push(std::move(out), [x, r](Tape& tape, const Matrix& g) {
      Matrix full = Matrix::Zero(tape.value(x).rows(), tape.value(x).cols());
      full.row(static_cast<Eigen::Index>(r)) = g.row(0);
      tape.accumulate(x, full);
    });
  }

  /// Minimum-word-error-rate loss over one n-best list.
  ///
  /// scores holds the 1x1 rescoring outputs s_i. Fused scores are
  /// v_i = alpha*u_i + beta*s_i, the posterior is p = softmax(-v), and the
  /// loss is sum_i (eps_i - mean(eps)) p_i. The gradient with respect to
  /// s_i is -beta * p_i * ((eps_i - mean(eps)) - loss).
  Var mwer_loss(std::span<const Var> scores, std::span<const double> first_pass,
                std::span<const double> edit_distances, double alpha, double beta);

  /// Backpropagates from a scalar `loss`, adding `seed * dloss/dtheta` into
  /// `grads` for every trainable parameter reached.
  void backward(Var loss, GradientSet& grads, double seed = 1.0) {
    if (nodes_.empty() || !loss.valid() || loss.index() >= nodes_.size()) {
      throw std::logic_error("backward called before a forward pass");
    }
    if (!opts_.record) throw std::logic_error("backward on a non-recording tape");
    if (value(loss).size() != 1) throw std::logic_error("backward needs a scalar loss");
    if (backward_done_) throw std::logic_error("backward already run on this tape");
    backward_done_ = true;
    sink_ = &grads;
    nodes_[loss.index()].grad = Matrix::Constant(1, 1, seed);
    for (std::size_t i = loss.index() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, n.grad);
      n.grad.resize(0, 0);
    }
    sink_ = nullptr;
  }

 private:
  using BackwardFn = std::function<void(Tape&, const Matrix&)>;

  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
  };

  bool wants_grad(ParamId p) const { return opts_.record && params_->trainable(p); }

  Var push(Matrix value, BackwardFn fn) {
    nodes_.push_back({std::move(value), Matrix(), opts_.record ? std::move(fn) : BackwardFn{}});
    return Var(nodes_.size() - 1);
  }

  void accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v.index()];
    if (!n.backward) return;  // constants and parameter-free leaves
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  const ParameterSet* params_;
  TapeOptions opts_;
  std::vector<Node> nodes_;
  GradientSet* sink_ = nullptr;
  bool backward_done_ = false;
};

inline Var Tape::mwer_loss(std::span<const Var> scores, std::span<const double> first_pass,
                           std::span<const double> edit_distances, double alpha, double beta) {
  const std::size_t n = scores.size();
  if (n == 0 || first_pass.size() != n || edit_distances.size() != n) {
    throw std::invalid_argument("mwer_loss: length mismatch");
  }
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = alpha * first_pass[i] + beta * scalar(scores[i]);
  const std::vector<double> p = training::posterior(v);
  const double loss = training::mwer_loss(edit_distances, p);
  std::vector<double> ds = training::mwer_gradient_wrt_fused(edit_distances, p);
  for (auto& d : ds) d *= beta;
  std::vector<Var> inputs(scores.begin(), scores.end());
  return push(Matrix::Constant(1, 1, loss),
              [inputs = std::move(inputs), ds = std::move(ds)](Tape& tape, const Matrix& g) {
                for (std::size_t i = 0; i < inputs.size(); ++i) {
                  tape.accumulate(inputs[i], Matrix::Constant(1, 1, ds[i] * g(0, 0)));
                }
              });
}

}  // namespace nbrescore::nnet
