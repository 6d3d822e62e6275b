#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "respira/core/error.hpp"

namespace respira::xai {

// One attribution result. values is row-major over `shape`; diagnostics
// carries method-specific numbers (completeness gap, standard errors, ...).
struct AttributionMap {
  std::string method;  // grad_cam | integrated_gradients | shap | shap_pixel_ig_approx
  int target_class = -1;
  std::vector<int> shape;
  std::vector<float> values;
  std::string baseline;  // human-readable baseline descriptor
  std::map<std::string, double> diagnostics;
};

}  // namespace respira::xai
