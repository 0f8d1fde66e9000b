#pragma once

#include <cstdio>
#include <string>

namespace rsrae {

// 17 significant digits: enough for an exact f64 round trip through text.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace rsrae
