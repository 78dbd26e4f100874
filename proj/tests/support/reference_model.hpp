#pragma once

// Extended-precision re-implementation of the windowed forward pass, used as
// an oracle for analytic gradients. It shares no code with the library beyond
// the data containers.

#include <map>
#include <string>
#include <vector>

#include "xespred/model.hpp"

namespace xespred::testing {

using Real = long double;
using TensorMap = std::map<std::string, std::vector<Real>>;  // row-major by tensor name

TensorMap to_reference(const ModelParams& params);

struct ReferenceLoss {
  Real combined = 0;
  std::vector<Real> per_target;
};

ReferenceLoss reference_window_loss(const Architecture& arch, const TensorMap& tensors,
                                    const Batch& batch, const RecurrentState& initial);

}  // namespace xespred::testing
