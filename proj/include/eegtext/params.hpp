#ifndef EEGTEXT_PARAMS_HPP_
#define EEGTEXT_PARAMS_HPP_

#include <string>
#include <vector>

#include "eegtext/tensor.hpp"

namespace eegtext {

// Named parameter collection with stable iteration order (insertion order).
// Tensors are immutable; updates replace the stored tensor wholesale, which
// keeps optimizer steps functional and checkpoints trivially reproducible.
struct ParamStore {
  struct Item {
    std::string name;
    Tensor value;
    bool trainable = true;
  };
  std::vector<Item> items;

  void add(const std::string& name, Tensor value, bool trainable = true);
  bool has(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  void set(const std::string& name, Tensor value);  // keeps trainable flag
};

// Total element count (trainable + frozen, i.e. BN running stats included).
size_t count_parameters(const ParamStore& params);
size_t count_trainable_parameters(const ParamStore& params);

}  // namespace eegtext

#endif  // EEGTEXT_PARAMS_HPP_
