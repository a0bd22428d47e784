#pragma once

#include <map>
#include <string>

#include "dvsgait/nn.hpp"

namespace dvsgait {

// SGD with classic momentum and decoupled-from-nothing weight decay folded
// into the gradient: v <- mu v + g + wd p; p <- p - lr v.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double weight_decay, double momentum)
      : lr_(lr), weight_decay_(weight_decay), momentum_(momentum) {}

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  // Aborts (throws, no partial update) if any gradient is non-finite.
  void step(const ParamList& params) {
    for (const auto& p : params)
      if (!p.grad->all_finite())
        throw Error(ErrorKind::numeric_error, "sgd: non-finite gradient in " + p.name);
    for (const auto& p : params) {
      Tensor& v = buffer(p);
      for (std::size_t i = 0; i < p.value->size(); ++i) {
        const double g = (*p.grad)[i] + weight_decay_ * (*p.value)[i];
        v[i] = momentum_ * v[i] + g;
        (*p.value)[i] -= lr_ * v[i];
      }
    }
  }

  const std::map<std::string, Tensor>& momentum_buffers() const { return velocity_; }
  std::map<std::string, Tensor>& momentum_buffers() { return velocity_; }

 private:
  Tensor& buffer(const ParamRef& p) {
    auto it = velocity_.find(p.name);
    if (it == velocity_.end()) {
      Tensor t;
      t.reshape({p.value->size()});
      it = velocity_.emplace(p.name, std::move(t)).first;
    }
    return it->second;
  }

  double lr_;
  double weight_decay_;
  double momentum_;
  std::map<std::string, Tensor> velocity_;
};

}  // namespace dvsgait
