// AdamW with decoupled weight decay over the parameter registry. Moment
// buffers live here, indexed in registry order; a global-norm gradient clip
// runs as a separate call before the step.

#ifndef SKH_OPTIM_HPP
#define SKH_OPTIM_HPP

#include <vector>

#include "skh/params.hpp"

namespace skh {

// Scales every gradient so the joint L2 norm is at most max_norm and returns
// the pre-clip norm. max_norm <= 0 disables clipping.
double clip_global_norm(ParamRegistry& params, double max_norm);

class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamRegistry& params);
  std::size_t steps_taken() const { return t_; }

 private:
  double lr_;
  double wd_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace skh

#endif  // SKH_OPTIM_HPP
