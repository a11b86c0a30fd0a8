#pragma once

#include "wb/search.hh"

#include <cstdint>
#include <string>
#include <vector>

namespace wb {

// Directed acyclic refutation graph: one source with the empty system, every
// internal node queries a parity with out-edges labeled P=0 and P=1, sinks
// carry output labels. Node 0 is the root.
struct AffineDag {
    struct Node {
        LinSys sys;
        bool sink = false;
        Output label;
        Parity query{F2Vec(0), false};
        int child[2] = {-1, -1};
    };
    uint32_t nvars = 0;
    std::vector<Node> nodes;

    size_t size() const { return nodes.size(); }
    uint32_t depth() const; // longest root-to-node path, in edges
    int run(const F2Vec &x) const; // sink index reached on x
};

struct DagReport {
    bool ok = true;
    std::string error;
    int where = -1;        // node id of the first violation
    F2Vec countermodel;    // filled for sink violations
    std::vector<std::string> warnings;

    explicit operator bool() const { return ok; }
};

// Structural checks, edge implications, and semantic sink soundness by
// enumerating each sink's solution space against r. Sinks with inconsistent
// systems are dead code and only warned about.
DagReport verify_affine_dag(const AffineDag &d, const SearchProblem &r,
                            uint32_t cap = kDefaultEnumCap);

// D restricted by a block-respecting rho: substitute in every query and
// system. Pair with restrict_search(r, rho) for verification.
AffineDag apply_restriction(const AffineDag &d, const AffRestr &rho,
                            const BlockLayout &lay);

// Unrolled tree of all paths from v of length at most depth. Leaves remember
// the DAG node they came from; cut internal nodes become abort leaves, sinks
// keep their labels.
Pdt truncate_to_pdt(const AffineDag &d, int v, uint32_t depth);

// System of the edge outcomes along the path that starts at u and follows
// the given branch bits.
LinSys path_system(const AffineDag &d, int u, const std::vector<bool> &branch);
// End node of that path plus the implication of Lemma about paths:
// Phi_u together with the edge equations implies Phi_end.
bool check_path_implication(const AffineDag &d, int u, const std::vector<bool> &branch);

// Tree-shaped DAG with node systems accumulated along each path. Refuses
// (throws std::invalid_argument with a countermodel description) unless t
// solves r on the whole promise domain.
AffineDag pdt_to_treelike_dag(const Pdt &t, const SearchProblem &r);

// Line format: "blocks m=<m> l=<l>", then "node <id> [sink <label>] system:
// <eq; eq; ...>" and "edge <u> <v> <equation>" lines; '#' comments.
std::string format_dag(const AffineDag &d, const BlockLayout &lay);
AffineDag parse_dag(const std::string &text, BlockLayout *lay_out = nullptr);

} // namespace wb
