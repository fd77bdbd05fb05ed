#ifndef SEMIDEC_IO_HPP
#define SEMIDEC_IO_HPP

#include <cstdio>
#include <string>

namespace semidec {

/// Shortest round-trip-exact decimal form, '.' separator, no grouping.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // trim digits while the value still round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(probe, "%lf", &back);
        if (back == v) return probe;
    }
    return buf;
}

} // namespace semidec

#endif
