#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>

namespace wb {

// Exact rational arithmetic. All probability accounting in the library is
// exact unless a function explicitly says "estimate".
using Rat = mpq_class;

inline Rat rat(long num, long den = 1) {
    Rat r(num, den);
    r.canonicalize();
    return r;
}

inline Rat rat_pow(const Rat &base, unsigned long e) {
    Rat r = 1;
    Rat b = base;
    while (e) {
        if (e & 1) r *= b;
        b *= b;
        e >>= 1;
    }
    return r;
}

inline std::string rat_str(const Rat &r) { return r.get_str(); }

inline double rat_double(const Rat &r) { return r.get_d(); }

} // namespace wb
