#pragma once

#include "wb/rat.hh"
#include "wb/tape.hh"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace wb {

// Block partial assignment on base inputs: one optional value per block.
using PartialVals = std::vector<std::optional<uint32_t>>;

PartialVals all_free(uint32_t n);
uint32_t count_fixed(const PartialVals &rho);
std::vector<uint32_t> free_blocks_of(const PartialVals &rho); // 1-based
// union of disjointly fixed assignments
PartialVals merge_partial(const PartialVals &a, const PartialVals &b);
bool consistent_with(const PartialVals &rho, const std::vector<uint32_t> &z);

// Downward closed collection of certificate-free block partial assignments
// with a hard distribution nu_rho for every member, plus its parameters.
struct HardnessFamily {
    std::string name;
    uint32_t n = 0; // base blocks
    uint32_t l = 0; // bits per base value
    uint32_t p = 0;
    uint32_t q = 0;
    Rat epsilon;

    std::function<bool(const PartialVals &)> member;
    // draws a full extension z of rho through the tape; the tape weight of
    // the draw is the exact nu_rho mass of z
    std::function<std::vector<uint32_t>(const PartialVals &, RandomTape &)> sample;
};

} // namespace wb
