#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wb {

// Packed bit vector of fixed length n over F2. Bit i lives at word i/64.
struct F2Vec {
    uint32_t n = 0;
    std::vector<uint64_t> w;

    F2Vec() = default;
    explicit F2Vec(uint32_t n) : n(n), w((n + 63) / 64, 0) {}

    bool get(uint32_t i) const { return (w[i >> 6] >> (i & 63)) & 1; }
    void set(uint32_t i, bool v) {
        uint64_t m = uint64_t(1) << (i & 63);
        if (v) w[i >> 6] |= m; else w[i >> 6] &= ~m;
    }
    void flip(uint32_t i) { w[i >> 6] ^= uint64_t(1) << (i & 63); }

    F2Vec &operator^=(const F2Vec &o) {
        for (size_t k = 0; k < w.size(); k++) w[k] ^= o.w[k];
        return *this;
    }
    friend F2Vec operator^(F2Vec a, const F2Vec &b) { a ^= b; return a; }

    bool any() const {
        for (uint64_t x : w) if (x) return true;
        return false;
    }
    bool is_zero() const { return !any(); }

    // Lowest set bit index, -1 if none.
    int lowest() const;
    int popcount() const;
    std::vector<uint32_t> ones() const;

    // Parity of the AND with o.
    bool dot(const F2Vec &o) const;

    bool operator==(const F2Vec &o) const { return n == o.n && w == o.w; }
    // Orders by lowest differing bit; the vector with a 0 there comes first.
    bool operator<(const F2Vec &o) const;
};

// Affine polynomial / equation over F2. As an equation it reads
// "form . x = constant"; as a query polynomial its value on x is
// constant + form . x. An edge outcome "P = beta" for a query P is the
// equation {P.form, P.constant ^ beta}.
struct Parity {
    F2Vec form;
    bool constant = false;

    Parity() = default;
    explicit Parity(uint32_t n) : form(n) {}
    Parity(F2Vec f, bool c) : form(std::move(f)), constant(c) {}

    bool eval(const F2Vec &x) const { return constant ^ form.dot(x); }
    bool sat_as_equation(const F2Vec &x) const { return form.dot(x) == constant; }
    bool trivial() const { return form.is_zero() && !constant; }

    bool operator==(const Parity &o) const { return constant == o.constant && form == o.form; }
    bool operator<(const Parity &o) const {
        if (form == o.form) return constant < o.constant;
        return form < o.form;
    }
};

inline Parity outcome_equation(const Parity &query, bool beta) {
    return Parity(query.form, query.constant ^ beta);
}

// Ordered list of equations over n variables. The canonical form produced by
// row_reduce has linearly independent rows with strictly increasing pivot
// indices and each pivot eliminated from every other row; an inconsistent
// system is exactly the single equation "0 = 1".
struct LinSys {
    uint32_t n = 0;
    std::vector<Parity> eqs;

    LinSys() = default;
    explicit LinSys(uint32_t n) : n(n) {}
    LinSys(uint32_t n, std::vector<Parity> eqs) : n(n), eqs(std::move(eqs)) {}

    void add(const Parity &e) { eqs.push_back(e); }
    bool sat(const F2Vec &x) const {
        for (const Parity &e : eqs)
            if (!e.sat_as_equation(x)) return false;
        return true;
    }
    bool operator==(const LinSys &o) const { return n == o.n && eqs == o.eqs; }
};

inline LinSys contradiction(uint32_t n) {
    LinSys s(n);
    s.add(Parity(F2Vec(n), true));
    return s;
}

LinSys row_reduce(const LinSys &sys);

// Valid on row_reduce output.
bool is_inconsistent(const LinSys &reduced);

// Rank of the system's row space; requires a consistent system.
uint32_t rank_of(const LinSys &sys);

// True iff every equation of b lies in the span of a (the inconsistent
// system implies everything).
bool implies(const LinSys &a, const LinSys &b);
bool implies_eq(const LinSys &a_reduced, const Parity &e);

LinSys union_sys(const LinSys &a, const LinSys &b);

// Fixes some variables as affine functions of the remaining free ones:
// x_v = value_v.constant + value_v.form . x with value_v.form supported on
// free variables only. Block-respecting checks live in blocks.hh.
struct AffRestr {
    uint32_t n = 0;
    std::map<uint32_t, Parity> fixed;

    AffRestr() = default;
    explicit AffRestr(uint32_t n) : n(n) {}

    bool fixes(uint32_t v) const { return fixed.count(v) != 0; }
    void fix(uint32_t v, Parity value);
    void fix_const(uint32_t v, bool value);
    size_t num_fixed() const { return fixed.size(); }

    // Completes x on the fixed variables from its free part.
    F2Vec extend(const F2Vec &free_part) const;
    // The system {x_v + value_v = 0 : v fixed}.
    LinSys graph_system() const;
};

Parity substitute(const Parity &eq, const AffRestr &rho);
LinSys substitute(const LinSys &sys, const AffRestr &rho);

// Composition: apply sigma on top of rho (sigma fixes variables free under
// rho); result fixes both sets.
AffRestr compose(const AffRestr &rho, const AffRestr &sigma);

struct EnumCapExceeded : std::runtime_error {
    uint64_t needed_log2;
    explicit EnumCapExceeded(uint64_t lg)
        : std::runtime_error("solution enumeration needs 2^" + std::to_string(lg) +
                             " assignments, over the configured cap"),
          needed_log2(lg) {}
};

inline constexpr uint32_t kDefaultEnumCap = 24;

// Calls fn on every solution exactly once, in the order induced by counting
// over the free (non-pivot) variables in ascending index order. Yields
// nothing for an inconsistent system. Throws EnumCapExceeded when the free
// dimension exceeds cap.
void for_each_solution(const LinSys &sys, uint32_t cap,
                       const std::function<void(const F2Vec &)> &fn);
std::vector<F2Vec> enumerate_solutions(const LinSys &sys, uint32_t cap = kDefaultEnumCap);

// Text format: one equation per line, "v<i> v<j> ... = <0|1>" with 1-based
// variable indices; "0" stands for the empty form; '#' starts a comment.
std::string format_system(const LinSys &sys);
LinSys parse_system(const std::string &text, uint32_t n);

std::string format_parity(const Parity &e);
Parity parse_parity(const std::string &line, uint32_t n);

} // namespace wb
