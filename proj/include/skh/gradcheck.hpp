// Finite-difference gradient checker for any scalar objective over a
// parameter registry.

#ifndef SKH_GRADCHECK_HPP
#define SKH_GRADCHECK_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "skh/common.hpp"
#include "skh/params.hpp"

namespace skh {

// Evaluates the objective from the current parameter values. When with_grad
// is true the implementation must also accumulate reverse-mode gradients
// into the params' grad buffers (which arrive zeroed). Must be deterministic.
using Objective = std::function<double(ParamRegistry&, bool with_grad)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double max_rel_err = 0.0;
  double loss = 0.0;
};

// Relative error with an absolute fallback near zero, so tiny gradients do
// not blow the ratio up on rounding noise.
inline double grad_rel_err(double analytic, double numeric) {
  const double denom = std::max(std::abs(analytic), std::abs(numeric));
  const double diff = std::abs(analytic - numeric);
  return denom > 1e-6 ? diff / denom : diff;
}

inline GradCheckReport grad_check(const Objective& f, ParamRegistry& params, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw NumericError("grad_check eps " + std::to_string(eps) + " outside [1e-7, 1e-3]");
  GradCheckReport report;
  params.zero_grads();
  report.loss = f(params, true);
  if (!std::isfinite(report.loss)) throw NumericError("non-finite objective at base point");

  std::vector<std::vector<double>> analytic(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) analytic[p] = params.at(p).grad;

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params.at(p);
    GradCheckEntry entry;
    entry.name = params.names()[p];
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + eps;
      const double fp = f(params, false);
      t.data[i] = saved - eps;
      const double fm = f(params, false);
      t.data[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericError("non-finite objective while perturbing " + entry.name);
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[p][i];
      entry.max_abs_err = std::max(entry.max_abs_err, std::abs(a - numeric));
      entry.max_rel_err = std::max(entry.max_rel_err, grad_rel_err(a, numeric));
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace skh

#endif  // SKH_GRADCHECK_HPP
