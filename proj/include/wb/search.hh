#pragma once

#include "wb/cnf.hh"
#include "wb/f2.hh"
#include "wb/gadget.hh"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace wb {

// block values of an input, one packed integer per block
using BlockVals = std::vector<uint32_t>;

// output labels are sorted index lists (block subsets for collision problems,
// a single 1-based clause index for false clause search)
using Output = std::vector<uint32_t>;

BlockVals blocks_of_vec(const F2Vec &x, const BlockLayout &lay);
F2Vec vec_of_blocks(const BlockVals &vals, const BlockLayout &lay);

struct SearchProblem {
    std::string name;
    BlockLayout lay;
    std::vector<Output> outputs;
    // promise may be empty (total problem); member returns true whenever the
    // promise is violated, so every output is correct off the promise
    std::function<bool(const BlockVals &)> promise;
    std::function<bool(const BlockVals &, const Output &)> relation;

    bool in_promise(const BlockVals &x) const { return !promise || promise(x); }
    bool member(const BlockVals &x, const Output &o) const {
        return !in_promise(x) || relation(x, o);
    }
    bool member_vec(const F2Vec &x, const Output &o) const {
        return member(blocks_of_vec(x, lay), o);
    }
};

SearchProblem coll_search(uint32_t l, uint32_t m);
SearchProblem tcoll_search(uint32_t l, uint32_t m, uint32_t t);
// promise: every block value lies in A
SearchProblem tcoll_promise_search(uint32_t l, uint32_t m, uint32_t t,
                                   std::vector<uint32_t> allowed);
// promise: every block value lies in A and the bitwise sum of all blocks is z
SearchProblem coll_sum_search(uint32_t l, uint32_t m, std::vector<uint32_t> allowed,
                              uint32_t z);
// promise: the input is a permutation of the multiset S; m = |S|
SearchProblem coll_multiset_search(uint32_t l, std::vector<uint32_t> multiset);
SearchProblem false_clause_search(const CnfFormula &phi);
// R composed with g: blocks grow to arity bits, solved through g per block
SearchProblem lift_search(const SearchProblem &base, const Gadget &g);
// R restricted by a block-respecting rho: fixed blocks are recomputed from the
// free blocks before consulting base
SearchProblem restrict_search(const SearchProblem &base, const AffRestr &rho);

bool block_respecting(const AffRestr &rho, const BlockLayout &lay);
std::vector<uint32_t> fixed_blocks(const AffRestr &rho, const BlockLayout &lay);
// overwrite the fixed blocks of x according to rho
F2Vec extend_by_restriction(const F2Vec &x, const AffRestr &rho);

// walk every input in the promise domain and check some output is valid;
// returns false and a countermodel through *counter when not total
bool search_total(const SearchProblem &r, BlockVals *counter = nullptr,
                  uint64_t cap = uint64_t(1) << 24);

struct Pdt {
    struct Node {
        bool leaf = false;
        bool abort = false; // leaf without an output
        Output label;
        Parity query{F2Vec(0), false};
        int child[2] = {-1, -1};
        int dag_node = -1; // origin when unrolled from a DAG
    };
    std::vector<Node> nodes; // node 0 is the root
    uint32_t nvars = 0;

    uint32_t depth() const;
    int run(const F2Vec &x) const; // leaf index reached on x
};

// leaf reached plus the traversed query outcomes as equations
struct PdtTrace {
    int leaf;
    LinSys path;
};
PdtTrace run_pdt_trace(const Pdt &t, const F2Vec &x);

// exhaustively check that t answers r on every promise input; fills counter
// with a violating input when it does not
bool pdt_solves(const Pdt &t, const SearchProblem &r, BlockVals *counter = nullptr,
                uint64_t cap = uint64_t(1) << 24);

} // namespace wb
