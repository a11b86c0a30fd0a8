#pragma once

#include "wb/f2.hh"

#include <random>

namespace wbt {

inline wb::F2Vec vec_of(uint32_t n, std::initializer_list<uint32_t> ones0) {
    wb::F2Vec v(n);
    for (uint32_t i : ones0) v.set(i, true);
    return v;
}

// Equation sum of 1-based vars = rhs.
inline wb::Parity eq(uint32_t n, std::initializer_list<uint32_t> vars1, bool rhs) {
    wb::F2Vec f(n);
    for (uint32_t v : vars1) f.flip(v - 1);
    return wb::Parity(f, rhs);
}

inline wb::LinSys sys_of(uint32_t n, std::initializer_list<wb::Parity> eqs) {
    wb::LinSys s(n);
    for (const auto &e : eqs) s.add(e);
    return s;
}

inline wb::F2Vec random_vec(uint32_t n, std::mt19937_64 &rng) {
    wb::F2Vec v(n);
    for (uint32_t i = 0; i < n; i++) v.set(i, rng() & 1);
    return v;
}

inline wb::LinSys random_sys(uint32_t n, uint32_t rows, std::mt19937_64 &rng) {
    wb::LinSys s(n);
    for (uint32_t r = 0; r < rows; r++) s.add(wb::Parity(random_vec(n, rng), rng() & 1));
    return s;
}

// Brute-force implication: every solution of a satisfies b.
inline bool implies_by_enumeration(const wb::LinSys &a, const wb::LinSys &b) {
    bool ok = true;
    wb::for_each_solution(a, 24, [&](const wb::F2Vec &x) { ok = ok && b.sat(x); });
    return ok;
}

} // namespace wbt
