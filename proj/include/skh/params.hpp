// Named registry of trainable tensors. Insertion order is preserved and is
// the canonical parameter order for checkpoints and gradient reports.

#ifndef SKH_PARAMS_HPP
#define SKH_PARAMS_HPP

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "skh/common.hpp"
#include "skh/tensor.hpp"

namespace skh {

class ParamRegistry {
 public:
  Tensor& add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw ValidationError("duplicate parameter name: " + name);
    t.requires_grad = true;
    index_[name] = order_.size();
    order_.push_back(name);
    store_.push_back(std::move(t));
    return store_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown parameter: " + name);
    return store_[it->second];
  }
  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown parameter: " + name);
    return store_[it->second];
  }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return store_.size(); }

  Tensor& at(std::size_t i) { return store_[i]; }
  const Tensor& at(std::size_t i) const { return store_[i]; }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const Tensor& t : store_) n += t.numel();
    return n;
  }

  void zero_grads() {
    for (Tensor& t : store_) {
      t.ensure_grad();
      t.zero_grad();
    }
  }

  bool all_finite() const {
    for (const Tensor& t : store_)
      if (!t.all_finite()) return false;
    return true;
  }

 private:
  std::vector<std::string> order_;
  std::deque<Tensor> store_;  // deque: references stay valid across add()
  std::map<std::string, std::size_t> index_;
};

}  // namespace skh

#endif  // SKH_PARAMS_HPP
