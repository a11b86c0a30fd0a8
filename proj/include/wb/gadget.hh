#pragma once

#include "wb/cnf.hh"
#include "wb/rat.hh"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace wb {

// Gadget g: {0,1}^arity -> {0,1}^out_bits with a stifling witness per output
// value and input position, and a delta-balanced mixture decomposition with
// exact rational masses. Input bit positions are 0-based; inputs and outputs
// are packed integers with bit h of the integer holding input bit h.
struct Gadget {
    std::string name;
    uint32_t arity = 0;
    uint32_t out_bits = 0;
    std::vector<uint32_t> table; // size 2^arity

    // stifle[y * arity + j]: full input with bit j cleared such that fixing
    // all bits except j to it forces output y
    std::vector<uint32_t> stifle;

    Rat delta;
    // mu[y]: distribution on g^{-1}(y);
    // part_a[y * arity + j], part_b[y * arity + j]: the mixture
    // mu_y = (1 - delta) A + delta (B x U_1) with the uniform bit at j;
    // part_b masses sit on inputs with bit j cleared
    std::vector<std::map<uint32_t, Rat>> mu;
    std::vector<std::map<uint32_t, Rat>> part_a;
    std::vector<std::map<uint32_t, Rat>> part_b;

    uint32_t inputs() const { return uint32_t(1) << arity; }
    uint32_t outputs() const { return uint32_t(1) << out_bits; }
    uint32_t eval(uint32_t u) const { return table[u]; }
};

// block indexing: input (s, x^0, x^1), output x^s; bit 0 is s, bits 1..l are
// x^0, bits l+1..2l are x^1; 1/3-balanced at every l
Gadget gadget_bind(uint32_t l);
Gadget gadget_maj3();
Gadget gadget_ind12();
Gadget gadget_ip22();
std::vector<Gadget> gadget_catalog(uint32_t bind_l = 1);

// fills delta = 1/arity, mu, part_a, part_b from the stifling witness
void balanced_from_stifling(Gadget &g);

// checks the truth table, every stifling witness, and the exact mixture
// identity for every output value and position; throws on violation
void verify_gadget(const Gadget &g);

// substitute a fresh arity-sized block for each variable of phi; requires a
// single-output gadget
CnfFormula compose_gadget(const CnfFormula &phi, const Gadget &g);

} // namespace wb
