#pragma once

#include "wb/blocks.hh"
#include "wb/cnf.hh"
#include "wb/family.hh"
#include "wb/gadget.hh"
#include "wb/search.hh"
#include "wb/sim.hh"

#include <cstdint>
#include <utility>
#include <vector>

namespace wb {

// Caller handed an input outside the documented domain.
struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A postcondition audit failed after construction. Every builder in this
// header re-checks its own guarantees before returning; a throw here means a
// bug, not bad input.
struct AuditError : std::logic_error {
    using std::logic_error::logic_error;
};

// Certified rational brackets lo <= exp(-x) <= hi for x >= 0, by alternating
// Taylor partial sums after halving the argument into [0, 1] and squaring the
// bracket back up.
std::pair<Rat, Rat> rat_exp_bounds(const Rat &x, uint32_t terms = 12);

// Restriction extracted from a successful multicollision run at a tree node
// carrying the safe system psi. Fixes the closure blocks to constants and one
// fresh block per residual rank to a near-constant pair, so that s blocks own
// at most 2s hole values and no value is owned t times.
struct TcollRestriction {
    AffRestr rho;
    std::vector<uint32_t> closure_blocks;
    std::vector<uint32_t> pivot_blocks;
    std::vector<uint32_t> fixed_blocks; // closure plus pivots, ascending
    std::vector<uint32_t> new_holes;    // values the fixed blocks can take
    uint32_t s = 0;                     // number of fixed blocks
};

TcollRestriction affine_restriction_tcoll(const TcollResult &run,
                                          const std::vector<uint32_t> &holes, uint32_t t,
                                          const LinSys &psi, const BlockLayout &lay);

// One elimination step: blocks i and ip leave the active set with coordinate
// j paired as x_{ip,j} = x_{i,j} + 1.
struct PivotStep {
    uint32_t i = 0, ip = 0, j = 0;
};

// Decomposition of a safe system that spans the active column sums into r
// pair substitutions plus the residual sums solved for one base block.
struct PivotPairs {
    AffRestr rho1;     // fixes the 2r paired coordinates
    AffRestr rho2;     // fixes the base block from the residual sums
    AffRestr combined; // rho2 then rho1 on top, flat
    std::vector<PivotStep> steps;
    std::vector<uint32_t> free_blocks;   // F, active minus pairs minus base
    std::vector<uint32_t> paired_blocks; // both blocks of every step
    uint32_t base_block = 0;             // i0
    uint32_t sum_consts = 0;             // entry sum constants, bit j-1 = b_j
};

// active lists 1-based blocks; empty means all of them. psi must be safe,
// span the active column sums, keep its support inside the active blocks,
// and satisfy m_active > 2r + l for r = rank - l.
PivotPairs find_pivots(const LinSys &psi, const BlockLayout &lay,
                       std::vector<uint32_t> active = {});

// Dimension of the subspace of span(psi restricted to the active columns)
// whose support lies inside the blocks of sub. Oracle hook for the bounded
// searches inside find_pivots.
uint32_t subspace_dim_within(const LinSys &psi, const BlockLayout &lay,
                             const std::vector<uint32_t> &active,
                             const std::vector<uint32_t> &sub);

// Multiset over allowed with |allowed| + k elements, multiplicity at most 2,
// at most k + 1 doubled values, and bitwise sum z. Requires |allowed| >
// 2^(l-1) + k.
std::vector<uint32_t> find_multiset(const std::vector<uint32_t> &allowed, uint32_t z,
                                    uint32_t k, uint32_t l);

// Restriction extracted from a successful collision run under a multiset
// promise. Fixes s = |closure| + 2r' blocks onto exactly s distinct values
// and leaves the surviving sum ledger over hat_free.
struct PermRestriction {
    AffRestr rho;
    std::vector<uint32_t> hat_free; // pair-free blocks plus the base block
    LinSys hat_eqs;                 // column sums over hat_free
    uint32_t b = 0;                 // their constants, bit j-1
    std::vector<uint32_t> used;     // U, the values owned by fixed blocks
    std::vector<uint32_t> closure_blocks;
    std::vector<PivotStep> steps;
    uint32_t s = 0;
};

PermRestriction affine_restriction_perm(const PermResult &run,
                                        const std::vector<uint32_t> &multiset,
                                        const std::vector<uint32_t> &allowed,
                                        const LinSys &psi, const BlockLayout &lay);

// Restriction extracted from a successful lifted run: closure blocks decode
// to fresh base values, one stifled block per residual rank, pivots solved.
struct LiftRestriction {
    AffRestr tau;          // on the lifted layout
    PartialVals rho_prime; // base values the fixed lifted blocks decode to
    std::vector<uint32_t> fixed_blocks;
    uint32_t s = 0;
};

LiftRestriction affine_restriction_lift(const PartialVals &rho, const LiftResult &run,
                                        const LinSys &phi, const HardnessFamily &family,
                                        const Gadget &g);

// Pigeonhole families: n + k pigeons into n holes, certificate-free partial
// assignments, nu_rho uniform over permutations of the unused holes with the
// k lowest doubled. epsilon is a certified rational lower bound of
// exp(-8 d^2 k / n^2). Binary encoding with n = 2^l, and unary one-hot rows.
HardnessFamily bphp_family(uint32_t l, uint32_t k, uint32_t d);
HardnessFamily fphp_family(uint32_t n, uint32_t k, uint32_t d);

// Sound false-clause search tree for the unary pigeonhole formula with m
// pigeons and n holes: m row sums, then either one even row read bitwise or
// a per-pigeon binary search for every hole. Depth m + max(n, m ceil(log2 n)).
Pdt fphp_pdt(uint32_t n, uint32_t m);

// Selector-prefixed lift of a sound base tree: queries every selector bit,
// replays base on the chosen copies, relabels leaves onto the block-indexing
// lift of base_cnf. Adds exactly m to the depth. Refuses a base tree that
// does not solve false clause search on base_cnf.
Pdt lift_pdt(const Pdt &base, const CnfFormula &base_cnf);

} // namespace wb
