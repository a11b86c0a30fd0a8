#pragma once

#include "wb/f2.hh"

#include <cstdint>
#include <vector>

namespace wb {

// m blocks of l bits; 1-based (i,j) maps to 0-based variable (i-1)*l + (j-1).
// A block value is read as an integer with bit j-1 equal to x_{i,j}; hole
// order everywhere in the library is the integer order of this encoding.
struct BlockLayout {
    uint32_t m = 0, l = 0;

    BlockLayout() = default;
    BlockLayout(uint32_t m, uint32_t l) : m(m), l(l) {}

    uint32_t nvars() const { return m * l; }
    uint32_t var(uint32_t i, uint32_t j) const { return (i - 1) * l + (j - 1); }
    uint32_t block_of(uint32_t v0) const { return v0 / l + 1; }
    uint32_t coord_of(uint32_t v0) const { return v0 % l + 1; }
    uint32_t holes() const { return uint32_t(1) << l; }

    uint32_t get_block(const F2Vec &x, uint32_t i) const {
        uint32_t y = 0;
        for (uint32_t j = 1; j <= l; j++)
            if (x.get(var(i, j))) y |= uint32_t(1) << (j - 1);
        return y;
    }
    void set_block(F2Vec &x, uint32_t i, uint32_t y) const {
        for (uint32_t j = 1; j <= l; j++) x.set(var(i, j), (y >> (j - 1)) & 1);
    }

    bool operator==(const BlockLayout &o) const { return m == o.m && l == o.l; }
};

// Homogeneous linear forms over a block layout. The span is what safety,
// closure, and safe dimension depend on; the listed forms are just one
// generating set.
struct FormSet {
    BlockLayout lay;
    std::vector<F2Vec> forms;

    FormSet() = default;
    explicit FormSet(BlockLayout lay) : lay(lay) {}
    FormSet(BlockLayout lay, std::vector<F2Vec> forms)
        : lay(lay), forms(std::move(forms)) {}
};

// 1-based blocks with a nonzero coefficient, sorted.
std::vector<uint32_t> support(const F2Vec &form, const BlockLayout &lay);
std::vector<uint32_t> support(const Parity &p, const BlockLayout &lay);

// The homogeneous projection sum_i c_{i,h} x_{i,h} onto coordinate h.
F2Vec proj(const Parity &p, uint32_t h, const BlockLayout &lay);
uint32_t proj_size(const Parity &p, uint32_t h, const BlockLayout &lay);

F2Vec zero_blocks(const F2Vec &form, const BlockLayout &lay,
                  const std::vector<uint32_t> &I);
FormSet remove_blocks(const FormSet &v, const std::vector<uint32_t> &I);

// RREF basis with ascending pivot indices; drops zero rows.
std::vector<F2Vec> reduce_forms(const std::vector<F2Vec> &forms);
uint32_t dim_of(const std::vector<F2Vec> &forms);
bool in_span(const F2Vec &form, const std::vector<F2Vec> &reduced_basis);

struct SafeReport {
    bool safe = false;
    // safe: dim(V) variable indices (0-based), pairwise distinct blocks,
    // whose columns in the reduced basis matrix are independent
    std::vector<uint32_t> witness_cols;
    // unsafe: independent forms in the span whose joint support is smaller
    // than their number; minimal by inclusion
    std::vector<F2Vec> dangerous;
};

SafeReport is_safe(const FormSet &v);

// The unique minimal block set whose removal makes v safe; sorted.
std::vector<uint32_t> closure(const FormSet &v);

uint32_t sdim(const FormSet &v);

// Safe W in the span of v with U as a subset and dim(W) = sdim(v). U must be
// independent forms from the span with dim(U[\cl(v)]) = |U|.
FormSet safe_extension(const FormSet &v, const std::vector<F2Vec> &U);

// Independent oracles; exhaustive over block subsets.
bool brute_force_safe(const FormSet &v, uint32_t max_m = 12);
std::vector<uint32_t> brute_force_closure(const FormSet &v, uint32_t max_m = 12);
// Max dimension of a safe subset of the span, by enumerating all subsets of
// span elements; needs dim(v) <= 4.
uint32_t brute_force_max_safe_dim(const FormSet &v);

// Max size set of columns, pairwise distinct blocks, independent in the
// matrix whose rows are the given forms. Matroid intersection between the
// linear matroid on columns and the block partition matroid.
std::vector<uint32_t> max_block_distinct_independent_cols(
    const std::vector<F2Vec> &forms, const BlockLayout &lay);

// Text format: header "blocks m=<m> l=<l>", then one form per line as an
// equation with zero right-hand side.
std::string format_formset(const FormSet &v);
FormSet parse_formset(const std::string &text);

} // namespace wb
