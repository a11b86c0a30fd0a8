#pragma once

#include "wb/blocks.hh"

#include <cstdint>
#include <string>
#include <vector>

namespace wb {

// DIMACS-style literal: +v or -v for the 1-based variable v.
using Lit = int32_t;

struct CnfFormula {
    BlockLayout lay;
    std::vector<std::vector<Lit>> clauses;

    CnfFormula() = default;
    explicit CnfFormula(BlockLayout lay_) : lay(lay_) {}

    uint32_t nvars() const { return lay.nvars(); }
    void add_clause(std::vector<Lit> c);
    uint32_t width() const;
    uint32_t block_width_of(const std::vector<Lit> &c) const;
    uint32_t block_width() const;
};

bool eval_clause(const std::vector<Lit> &c, const std::vector<bool> &x);
bool eval_formula(const CnfFormula &phi, const std::vector<bool> &x);
bool brute_force_unsat(const CnfFormula &phi, uint32_t max_vars = 22);

// m pigeons into n = 2^l holes, hole of pigeon i encoded by block i in binary.
// One clause per pigeon pair and hole.
CnfFormula gen_bphp(uint32_t l, uint32_t m);

// One clause per t-subset of pigeons and hole.
CnfFormula gen_tbphp(uint32_t l, uint32_t m, uint32_t t);

// Unary encoding: pigeon i holds n indicator variables, one per hole.
CnfFormula gen_fphp(uint32_t n, uint32_t m);

// Block i of the input becomes a block s_i, x^0_i[1..l], x^1_i[1..l]; each
// clause of block-width b expands into 2^b clauses over the selector branches.
CnfFormula lift_block_indexing(const CnfFormula &phi);

std::string to_dimacs(const CnfFormula &phi);
CnfFormula from_dimacs(const std::string &text);

} // namespace wb
