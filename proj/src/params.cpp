#include "eegtext/params.hpp"

#include "eegtext/errors.hpp"

namespace eegtext {

void ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (has(name)) throw ConfigError("duplicate parameter name: " + name);
  if (!value.defined()) throw ConfigError("undefined parameter: " + name);
  items.push_back({name, std::move(value), trainable});
}

bool ParamStore::has(const std::string& name) const {
  for (const Item& it : items)
    if (it.name == name) return true;
  return false;
}

const Tensor& ParamStore::at(const std::string& name) const {
  for (const Item& it : items)
    if (it.name == name) return it.value;
  throw ConfigError("unknown parameter name: " + name);
}

void ParamStore::set(const std::string& name, Tensor value) {
  for (Item& it : items) {
    if (it.name != name) continue;
    if (value.shape() != it.value.shape())
      throw ConfigError("parameter shape change for " + name + ": " +
                        shape_str(it.value.shape()) + " -> " +
                        shape_str(value.shape()));
    it.value = std::move(value);
    return;
  }
  throw ConfigError("unknown parameter name: " + name);
}

size_t count_parameters(const ParamStore& params) {
  size_t n = 0;
  for (const ParamStore::Item& it : params.items) n += it.value.size();
  return n;
}

size_t count_trainable_parameters(const ParamStore& params) {
  size_t n = 0;
  for (const ParamStore::Item& it : params.items)
    if (it.trainable) n += it.value.size();
  return n;
}

}  // namespace eegtext
