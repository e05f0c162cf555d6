#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace anytime {

/// 12 significant digits, the precision used for every emitted number.
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// `v` rounded to 12 significant digits.
inline double round_significant(double v) {
    return std::strtod(format_number(v).c_str(), nullptr);
}

}  // namespace anytime
