#include "ocan/params.hpp"

#include <cmath>

#include "ocan/errors.hpp"

namespace ocan {

Tensor& ParamGroup::add(std::string name, Tensor init) {
  if (contains(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
  if (!init.all_finite()) throw NumericError("non-finite initial value for '" + name + "'");
  Tensor grad(init.rows(), init.cols());
  entries_.push_back(Entry{std::move(name), std::move(init), std::move(grad)});
  return entries_.back().value;
}

std::optional<std::size_t> ParamGroup::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamGroup::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ArgumentError("unknown parameter '" + std::string(name) + "'");
}

void ParamGroup::zero_grad() {
  for (auto& e : entries_) e.grad.set_zero();
}

Index ParamGroup::parameter_count() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

bool ParamGroup::same_values(const ParamGroup& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (!(entries_[i].value == other.entries_[i].value)) return false;
  }
  return true;
}

void ParamGroup::load_prefixed(const ParamGroup& other, std::string_view prefix) {
  for (const auto& e : other) {
    const std::string name = std::string(prefix) + e.name;
    if (auto i = find(name)) {
      if (!entries_[*i].value.same_shape(e.value)) {
        throw ShapeError("parameter '" + name + "' has shape " + entries_[*i].value.shape_str() +
                         " but source has " + e.value.shape_str());
      }
      entries_[*i].value = e.value;
    } else {
      add(name, e.value);
    }
  }
}

ParamGroup ParamGroup::extract_prefixed(std::string_view prefix) const {
  ParamGroup out;
  for (const auto& e : entries_) {
    if (e.name.size() >= prefix.size() && std::string_view(e.name).substr(0, prefix.size()) == prefix) {
      out.add(e.name.substr(prefix.size()), e.value);
    }
  }
  return out;
}

Tensor init_weight(SeededRng& rng, Index fan_in, Index fan_out) {
  if (fan_in <= 0 || fan_out <= 0) throw ArgumentError("init_weight: non-positive fan");
  const double k = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor w(fan_in, fan_out);
  for (double& v : w.data()) v = rng.uniform(-k, k);
  return w;
}

}  // namespace ocan
