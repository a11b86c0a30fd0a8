#pragma once

#include "wb/blocks.hh"
#include "wb/family.hh"
#include "wb/gadget.hh"
#include "wb/search.hh"
#include "wb/tape.hh"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wb {

// An invariant of the matching lemma failed at an iteration boundary. This
// signals a bug in the simulation, never expected behavior.
struct SimInvariantViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct SimStep {
    uint32_t iter = 0;
    int node = -1;                // v at the start of the iteration
    Parity live{F2Vec(0), false}; // query after substitution and rewrites
    int block = 0;                // chosen block, 1-based; 0 on determined steps
    int bit = 0;                  // chosen coordinate, 1-based
    std::string note;             // branch taken and sampled values
};

struct SimTranscript {
    std::vector<SimStep> steps;
    bool fail = false;
    std::string status; // "ok" or the failure reason
    int leaf = -1;
};

std::string format_transcript(const SimTranscript &tr);

// Multicollision simulation under uniform holes: walks the tree, localizes
// each undetermined query to one fresh bit of the least free block touching
// it, and retires that block into the used-hole list C.
struct TcollResult {
    bool fail = false;
    int leaf = -1;
    std::vector<std::vector<uint32_t>> used; // C, one hole set per retirement
    LinSys eqs;                              // L, in order of insertion
    std::vector<uint32_t> free_blocks;       // F, 1-based
    AffRestr solved;                         // L as fixed vars over free vars
    SimTranscript transcript;
};

TcollResult sim_tcoll(const std::vector<uint32_t> &holes, uint32_t t, const Pdt &tree,
                      const BlockLayout &lay, RandomTape &tape, bool check = true);

// Collision simulation under uniform permutations of a multiset. Holes carry
// a color; a doubled string contributes a blue and a red copy.
using ColoredHole = std::pair<uint32_t, int>; // (string, color)
inline constexpr int kBlue = 0;
inline constexpr int kRed = 1;

std::vector<ColoredHole> color_multiset(const std::vector<uint32_t> &multiset);

struct PermResult {
    bool fail = false;
    int leaf = -1;
    std::vector<ColoredHole> avail;    // A
    LinSys eqs;                        // L
    std::vector<uint32_t> free_blocks; // F, 1-based
    LinSys perm_eqs;                   // L_F rebuilt for the final F and A
    std::vector<int> colors;           // col per block; -1 when free
    AffRestr solved;
    struct PairFix {
        uint32_t i, g; // both 1-based
        uint32_t y;
        uint32_t j; // 1-based coordinate left open
    };
    std::vector<PairFix> pairs; // blocks fixed as an unresolved {y, y^flip j}
    SimTranscript transcript;
};

PermResult sim_perm(const std::vector<uint32_t> &multiset, uint32_t l, const Pdt &tree,
                    RandomTape &tape, bool check = true);

// Lifted simulation: queries the base string z block by block and fixes
// lifted blocks through the gadget's balanced mixture.
struct LiftResult {
    bool fail = false;
    int leaf = -1;
    PartialVals sigma;                 // base values revealed by queries
    LinSys eqs;                        // L
    std::vector<uint32_t> free_blocks; // free lifted blocks, 1-based
    AffRestr solved;
    std::vector<uint32_t> z; // the drawn base string
    SimTranscript transcript;
};

LiftResult sim_lift(const PartialVals &rho, const Pdt &tree, const HardnessFamily &family,
                    const Gadget &g, RandomTape &tape, bool check = true);

// The at most two values block i can take under a solved form that fixes it.
// Fixed blocks keep at most one undetermined bit, so the list has length 1
// or 2; anything else is an invariant violation.
std::vector<uint32_t> block_completions(const AffRestr &solved, uint32_t i,
                                        const BlockLayout &lay);

// Constructive witnesses behind the success cases: an input that reaches the
// returned leaf yet denies the candidate output.
F2Vec not_sink_witness_tcoll(const TcollResult &res, const std::vector<uint32_t> &holes,
                             uint32_t t, const std::vector<uint32_t> &index_set,
                             const Pdt &tree, const BlockLayout &lay);
F2Vec not_sink_witness_perm(const PermResult &res, const std::vector<uint32_t> &multiset,
                            uint32_t l, uint32_t i1, uint32_t i2, const Pdt &tree);
// o must fail on some base input consistent with rho and sigma; base is the
// unrestricted problem on the family's layout
F2Vec not_sink_witness_lift(const LiftResult &res, const PartialVals &rho,
                            const SearchProblem &base, const Output &o,
                            const HardnessFamily &family, const Gadget &g,
                            const Pdt &tree);

// Balls in bins. Bins are graph vertices; one throw floods the matching
// component of a uniformly chosen eligible bin.
struct BinsGraph {
    uint32_t r = 0;      // bins 0..r-1
    uint32_t paired = 0; // bins i and (r - paired) + i pair up for i < paired
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    std::vector<int> side; // bipartition, 0 or 1 per vertex
};

// subgraph of the l-cube induced by the given strings
BinsGraph hypercube_bins(uint32_t l, const std::vector<uint32_t> &holes);
// blue strings of the multiset as a cube subgraph plus one isolated bin per
// doubled string, paired with its blue copy
BinsGraph coll_bins(uint32_t l, const std::vector<uint32_t> &multiset);

enum class BinsPick {
    all_bins,      // throw at a uniform vertex of the whole graph
    empty_bins,    // restrict each round to bins still empty
    nonempty_bins, // literal variant kept selectable; rounds may be idle
};

struct BinsState {
    const BinsGraph &graph;
    BinsPick mode;
    uint32_t iter;
    std::vector<uint32_t> occupancy;
    std::vector<uint32_t> eligible; // bins a throw may land on this round
};

// returns a matching among eligible bins; edges must come from the graph
using BinsStrategy = std::function<std::vector<std::pair<uint32_t, uint32_t>>(const BinsState &)>;

BinsStrategy empty_matching_strategy();
// matches eligible bins along cube direction 1 + (iter mod l)
BinsStrategy direction_strategy(uint32_t l, const std::vector<uint32_t> &holes);

struct BallsResult {
    std::vector<uint32_t> occupancy;
    bool t_collision = false;    // some bin holds at least t balls
    bool pair_collision = false; // some paired bins are both occupied
    uint32_t idle = 0;           // rounds with no eligible bin
};

BallsResult balls_bins(const BinsGraph &g, const BinsStrategy &strategy, uint32_t d,
                       uint32_t t, RandomTape &tape,
                       BinsPick mode = BinsPick::all_bins);

// leaf distribution of a tree under an explicit weighted input list
std::map<int, Rat> pdt_distribution(const Pdt &tree,
                                    const std::vector<std::pair<F2Vec, Rat>> &inputs);

} // namespace wb
