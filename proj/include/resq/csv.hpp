#pragma once

#include <cstdio>
#include <string>

namespace resq {

/// Shortest %g rendering with 12 significant digits. Used for every CSV
/// number so outputs are byte-stable across runs.
inline std::string fmt12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x == 0.0 ? 0.0 : x);  // folds -0 into 0
    return buf;
}

}  // namespace resq
