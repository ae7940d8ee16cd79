#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "graphcontrol/errors.hpp"
#include "graphcontrol/nn.hpp"

namespace graphcontrol {

enum class OptimizerKind { sgd, adam, adamw };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  if (s == "adamw") return OptimizerKind::adamw;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd, adam or adamw)");
}

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adamw: return "adamw";
  }
  return "?";
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// SGD (L2 weight decay, optional momentum), Adam (L2 weight decay folded
/// into the gradient) and AdamW (decoupled weight decay). State is kept per
/// parameter slot, so step() must always see the same tensors in the same order.
template <class S>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(const std::vector<Tensor<S>*>& params, const std::vector<Tensor<S>*>& grads) {
    if (first_.empty()) {
      for (auto* p : params) {
        first_.push_back(Tensor<S>::Zero(p->rows(), p->cols()));
        second_.push_back(Tensor<S>::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const S lr = static_cast<S>(cfg_.learning_rate);
    const S wd = static_cast<S>(cfg_.weight_decay);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<S>& p = *params[i];
      Tensor<S> g = *grads[i];
      switch (cfg_.kind) {
        case OptimizerKind::sgd: {
          if (wd != S(0)) g += wd * p;
          if (cfg_.momentum != 0.0) {
            first_[i] = static_cast<S>(cfg_.momentum) * first_[i] + g;
            g = first_[i];
          }
          p -= lr * g;
          break;
        }
        case OptimizerKind::adam:
        case OptimizerKind::adamw: {
          if (cfg_.kind == OptimizerKind::adamw)
            p *= S(1) - lr * wd;
          else if (wd != S(0))
            g += wd * p;
          const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
          first_[i] = b1 * first_[i] + (S(1) - b1) * g;
          second_[i] = b2 * second_[i] + (S(1) - b2) * g.cwiseProduct(g);
          const S c1 = S(1) - static_cast<S>(std::pow(cfg_.beta1, t_));
          const S c2 = S(1) - static_cast<S>(std::pow(cfg_.beta2, t_));
          const S eps = static_cast<S>(cfg_.epsilon);
          p.array() -= lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps);
          break;
        }
      }
    }
  }

 private:
  OptimizerConfig cfg_;
  std::vector<Tensor<S>> first_;
  std::vector<Tensor<S>> second_;
  long t_ = 0;
};

}  // namespace graphcontrol
