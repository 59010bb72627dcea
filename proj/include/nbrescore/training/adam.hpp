#pragma once

#include <cmath>
#include <vector>

#include "nbrescore/nnet/tensor.hpp"

namespace nbrescore::training {

// Adam with bias correction. Frozen parameters are skipped entirely.
class Adam {
 public:
  explicit Adam(const nnet::ParameterSet& params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps), m_(params.size()), v_(params.size()) {}

  void step(nnet::ParameterSet& params, const nnet::GradientSet& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const nnet::ParamId id{i};
      if (!params.trainable(id)) continue;
      auto& w = params.value(id);
      auto& m = m_[i];
      auto& v = v_[i];
      if (m.size() == 0) {
        m = nnet::Matrix::Zero(w.rows(), w.cols());
        v = nnet::Matrix::Zero(w.rows(), w.cols());
      }
      if (grads.touched(id)) {
        const nnet::Matrix g = grads.dense(id);
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
      } else {
        m *= beta1_;
        v *= beta2_;
      }
      w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<nnet::Matrix> m_, v_;
};

}  // namespace nbrescore::training
