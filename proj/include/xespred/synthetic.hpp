#pragma once

#include <cstdint>
#include <string>

#include "xespred/xes.hpp"

namespace xespred {

struct SyntheticSpec {
  std::size_t variants = 2;          // 1..720
  std::size_t traces_per_variant = 50;
  std::uint64_t seed = 1;
  double noise = 0.0;  // probability of replacing an activity
};

/// Deterministic demo log. Variant v runs A, then the v-th permutation of the
/// middle activities, then a closing activity; with two variants that is
/// A B C D and A C B D. Each event carries an org:resource naming activity
/// and variant, a lifecycle transition, an integer cost and a timestamp.
EventLog generate_synthetic_log(const SyntheticSpec& spec);

/// Activity sequence of variant `v` (0-based) before noise.
std::vector<std::string> synthetic_variant(std::size_t variants, std::size_t v);

}  // namespace xespred
