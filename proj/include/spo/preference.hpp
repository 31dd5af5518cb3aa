#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace spo {

// One preference observation w = (x, y0, y1) with label z = 1{y1 preferred}.
// y0 == y1 is allowed (independent uniform draws keep ties).  `id` is the
// position in the owning dataset and keyed on by leave-one-out estimators.
// `delta_r` is the generator's reward gap, populated in debug mode only and
// never read by learners.
struct PreferenceExample {
    std::vector<double> x;
    int y0 = 0;
    int y1 = 0;
    int z = 0;
    std::int64_t id = -1;
    std::optional<double> delta_r;
};

using Dataset = std::vector<PreferenceExample>;

}  // namespace spo
