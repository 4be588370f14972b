#pragma once

#include <string>
#include <string_view>

#include "nnpda/controller.hpp"

namespace nnpda {

// A controller together with the alphabet and run settings it was trained
// with.
struct Model {
  Alphabet alphabet;
  WeightSet weights;
  double epsilon = kDefaultEpsilon;
  ClassifyRule rule = ClassifyRule::h_measure;
  bool pop_empty_rejects = true;

  bool operator==(const Model&) const = default;
};

// Text container: version line, header keys, then named tensors with explicit
// dimensions. Values use 17 significant digits so a save/load round trip is
// exact.
std::string save_model_text(const Model& m);
Model parse_model_text(std::string_view text);
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace nnpda
