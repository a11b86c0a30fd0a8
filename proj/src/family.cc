#include "wb/family.hh"

#include <stdexcept>

namespace wb {

PartialVals all_free(uint32_t n) { return PartialVals(n); }

uint32_t count_fixed(const PartialVals &rho) {
    uint32_t c = 0;
    for (const auto &v : rho)
        if (v) c++;
    return c;
}

std::vector<uint32_t> free_blocks_of(const PartialVals &rho) {
    std::vector<uint32_t> out;
    for (uint32_t i = 0; i < rho.size(); i++)
        if (!rho[i]) out.push_back(i + 1);
    return out;
}

PartialVals merge_partial(const PartialVals &a, const PartialVals &b) {
    if (a.size() != b.size()) throw std::invalid_argument("merging different lengths");
    PartialVals out = a;
    for (uint32_t i = 0; i < b.size(); i++) {
        if (!b[i]) continue;
        if (out[i] && *out[i] != *b[i])
            throw std::invalid_argument("merged assignments disagree");
        out[i] = b[i];
    }
    return out;
}

bool consistent_with(const PartialVals &rho, const std::vector<uint32_t> &z) {
    if (rho.size() != z.size()) return false;
    for (uint32_t i = 0; i < rho.size(); i++)
        if (rho[i] && *rho[i] != z[i]) return false;
    return true;
}

} // namespace wb
