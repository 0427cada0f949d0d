#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocan/rng.hpp"
#include "ocan/tensor.hpp"

namespace ocan {

// Named parameter tensors with gradient accumulators of identical shape.
// Iteration order is insertion order and never changes.
class ParamGroup {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };

  Tensor& add(std::string name, Tensor init);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(std::string_view name) const { return find(name).has_value(); }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  Tensor& value(std::string_view name) { return entries_[index_of(name)].value; }
  const Tensor& value(std::string_view name) const { return entries_[index_of(name)].value; }
  Tensor& grad(std::string_view name) { return entries_[index_of(name)].grad; }
  const Tensor& grad(std::string_view name) const { return entries_[index_of(name)].grad; }

  Entry& operator[](std::size_t i) { return entries_[i]; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  Index parameter_count() const;
  // Bitwise equality of names, shapes and values (gradients ignored).
  bool same_values(const ParamGroup& other) const;
  // Copies every tensor of `other` into the entries of this group whose names
  // are `prefix + other_name`.
  void load_prefixed(const ParamGroup& other, std::string_view prefix);
  ParamGroup extract_prefixed(std::string_view prefix) const;

 private:
  std::vector<Entry> entries_;
};

// Weights uniform on [-k, k] with k = sqrt(1 / fan_in).
Tensor init_weight(SeededRng& rng, Index fan_in, Index fan_out);

}  // namespace ocan
