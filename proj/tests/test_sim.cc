#include "wb/sim.hh"

#include "wb/search.hh"

#include "test_util.hh"

#include <algorithm>
#include <doctest.h>
#include <set>
#include <sstream>

using namespace wb;
using namespace wbt;

namespace {

// complete tree of the given depth with random nonzero queries
Pdt random_tree(uint32_t nvars, uint32_t depth, std::mt19937_64 &rng) {
    Pdt t;
    t.nvars = nvars;
    std::function<int(uint32_t)> build = [&](uint32_t left) {
        int at = int(t.nodes.size());
        t.nodes.emplace_back();
        if (left == 0) {
            t.nodes[at].leaf = true;
            t.nodes[at].abort = true;
            return at;
        }
        F2Vec f(nvars);
        while (f.is_zero()) f = random_vec(nvars, rng);
        int c0 = build(left - 1);
        int c1 = build(left - 1);
        t.nodes[at].query = Parity(f, false);
        t.nodes[at].child[0] = c0;
        t.nodes[at].child[1] = c1;
        return at;
    };
    build(depth);
    return t;
}

Pdt one_query_tree(uint32_t nvars, const Parity &q) {
    Pdt t;
    t.nvars = nvars;
    t.nodes.resize(3);
    t.nodes[0].query = q;
    t.nodes[0].child[0] = 1;
    t.nodes[0].child[1] = 2;
    t.nodes[1].leaf = t.nodes[2].leaf = true;
    t.nodes[1].abort = t.nodes[2].abort = true;
    return t;
}

// leaf distribution over uniform block values from the given hole set
std::map<int, Rat> tcoll_input_distribution(const Pdt &tree, const BlockLayout &lay,
                                            const std::vector<uint32_t> &holes) {
    std::vector<std::pair<F2Vec, Rat>> inputs;
    Rat w = rat_pow(rat(1, long(holes.size())), lay.m);
    std::vector<uint32_t> pickat(lay.m, 0);
    for (;;) {
        F2Vec x(lay.nvars());
        for (uint32_t i = 1; i <= lay.m; i++) lay.set_block(x, i, holes[pickat[i - 1]]);
        inputs.push_back({x, w});
        uint32_t i = 0;
        while (i < lay.m && ++pickat[i] == holes.size()) pickat[i++] = 0;
        if (i == lay.m) break;
    }
    return pdt_distribution(tree, inputs);
}

// leaf distribution over uniform permutations of the multiset
std::map<int, Rat> perm_input_distribution(const Pdt &tree, uint32_t l,
                                           std::vector<uint32_t> multiset) {
    BlockLayout lay{uint32_t(multiset.size()), l};
    std::sort(multiset.begin(), multiset.end());
    std::vector<std::vector<uint32_t>> arr;
    do {
        arr.push_back(multiset);
    } while (std::next_permutation(multiset.begin(), multiset.end()));
    std::vector<std::pair<F2Vec, Rat>> inputs;
    Rat w = rat(1, long(arr.size()));
    for (const auto &a : arr) {
        F2Vec x(lay.nvars());
        for (uint32_t i = 1; i <= lay.m; i++) lay.set_block(x, i, a[i - 1]);
        inputs.push_back({x, w});
    }
    return pdt_distribution(tree, inputs);
}

std::map<int, Rat> leaf_marginal(const std::map<SimOutcome, Rat> &dist) {
    std::map<int, Rat> out;
    for (const auto &[key, w] : dist) out[key.first] += w;
    return out;
}

Rat fail_mass(const std::map<SimOutcome, Rat> &dist) {
    Rat f = 0;
    for (const auto &[key, w] : dist)
        if (key.second) f += w;
    return f;
}

HardnessFamily toy_family(uint32_t n, uint32_t l,
                          std::function<bool(const PartialVals &)> member = nullptr) {
    HardnessFamily f;
    f.name = "toy";
    f.n = n;
    f.l = l;
    f.p = n;
    f.q = n;
    f.epsilon = rat(1, 2);
    f.member = member ? std::move(member) : [](const PartialVals &) { return true; };
    f.sample = [n, l](const PartialVals &rho, RandomTape &tape) {
        std::vector<uint32_t> z(n, 0);
        std::vector<Rat> w(size_t(1) << l, rat(1, 1l << l));
        for (uint32_t i = 0; i < n; i++)
            z[i] = rho[i] ? *rho[i] : tape.choose("base", w);
        return z;
    };
    return f;
}

// lifted leaf distribution computed input side: z from the uniform completion
// of rho, then every block independently from mu[z_i]
std::map<int, Rat> lift_input_distribution(const Pdt &tree, const PartialVals &rho,
                                           const Gadget &g) {
    uint32_t n = uint32_t(rho.size());
    BlockLayout lay{n, g.arity};
    uint32_t width = uint32_t(1) << g.out_bits;
    uint32_t open = 0;
    for (uint32_t i = 0; i < n; i++)
        if (!rho[i]) open++;
    Rat zw = rat_pow(rat(1, long(width)), open);

    std::map<int, Rat> out;
    std::vector<uint32_t> z(n, 0);
    std::function<void(uint32_t)> per_z = [&](uint32_t at) {
        if (at == n) {
            std::vector<std::pair<F2Vec, Rat>> inputs = {{F2Vec(lay.nvars()), zw}};
            for (uint32_t i = 1; i <= n; i++) {
                std::vector<std::pair<F2Vec, Rat>> next;
                for (const auto &[x, w] : inputs)
                    for (const auto &[u, uw] : g.mu.at(z[i - 1])) {
                        F2Vec x2 = x;
                        lay.set_block(x2, i, u);
                        next.push_back({x2, w * uw});
                    }
                inputs = next;
            }
            for (const auto &[x, w] : inputs) out[tree.run(x)] += w;
            return;
        }
        if (rho[at]) {
            z[at] = *rho[at];
            per_z(at + 1);
            return;
        }
        for (uint32_t val = 0; val < width; val++) {
            z[at] = val;
            per_z(at + 1);
        }
    };
    per_z(0);
    return out;
}

void check_perm_exhaustive(const PermResult &res, const std::vector<uint32_t> &multiset,
                           uint32_t l) {
    BlockLayout lay{uint32_t(multiset.size()), l};
    std::multiset<uint32_t> removed;
    for (const auto &[y, c] : color_multiset(multiset)) removed.insert(y);
    for (const auto &[y, c] : res.avail) removed.erase(removed.find(y));

    uint32_t nf = uint32_t(res.free_blocks.size()) * l;
    REQUIRE(nf <= 12);
    for (uint32_t bits = 0; bits < (uint32_t(1) << nf); bits++) {
        F2Vec fp(lay.nvars());
        for (uint32_t k = 0; k < res.free_blocks.size(); k++)
            lay.set_block(fp, res.free_blocks[k], (bits >> (k * l)) & (lay.holes() - 1));
        F2Vec x = res.solved.extend(fp);
        std::multiset<uint32_t> got;
        std::set<uint32_t> fset(res.free_blocks.begin(), res.free_blocks.end());
        for (uint32_t i = 1; i <= lay.m; i++)
            if (!fset.count(i)) got.insert(lay.get_block(x, i));
        REQUIRE(got == removed);
    }
}

} // namespace

TEST_CASE("tapes record exact events and replay") {
    SeededTape t1(7), t2(7);
    std::vector<Rat> w = {rat(1, 4), rat(1, 4), rat(1, 2)};
    for (int i = 0; i < 20; i++) {
        CHECK(t1.choose("pick", w) == t2.choose("pick", w));
    }
    CHECK(t1.events.size() == 20);
    CHECK(t1.weight() == t2.weight());

    std::vector<uint32_t> picks;
    for (const TapeEvent &e : t1.events) picks.push_back(e.pick);
    FixedTape ft(picks);
    for (int i = 0; i < 20; i++) CHECK(ft.choose("pick", w) == picks[i]);
    CHECK_THROWS_AS(ft.choose("pick", w), std::out_of_range);

    FixedTape bad({0});
    CHECK_THROWS_AS(bad.choose("pick", {rat(1, 3), rat(1, 3)}), std::invalid_argument);
    FixedTape zero({1});
    CHECK_THROWS_AS(zero.choose("pick", {rat(1), Rat(0)}), std::logic_error);
}

TEST_CASE("seeded draws follow the exact weights") {
    SeededTape t(99);
    std::vector<Rat> w = {rat(1, 6), rat(2, 6), rat(3, 6)};
    uint64_t cnt[3] = {0, 0, 0};
    for (int i = 0; i < 6000; i++) cnt[t.choose("skew", w)]++;
    CHECK(cnt[0] > 700);
    CHECK(cnt[0] < 1300);
    CHECK(cnt[2] > 2600);
    CHECK(cnt[2] < 3400);
}

TEST_CASE("tape enumeration walks every branch once") {
    auto run = [](RandomTape &t) {
        uint32_t a = t.choose("a", {rat(1, 2), rat(1, 2)});
        if (a == 0) t.choose("b", {rat(1, 3), rat(2, 3)});
    };
    std::vector<Rat> weights;
    for_each_tape(run, [&](const RandomTape &t) { weights.push_back(t.weight()); });
    REQUIRE(weights.size() == 3);
    CHECK(weights[0] == rat(1, 6));
    CHECK(weights[1] == rat(1, 3));
    CHECK(weights[2] == rat(1, 2));

    auto wide = [](RandomTape &t) {
        for (int i = 0; i < 5; i++) t.choose("c", {rat(1, 2), rat(1, 2)});
    };
    CHECK_THROWS_AS(for_each_tape(wide, [](const RandomTape &) {}, 10), TapeCapExceeded);

    auto dist = exact_outcome_distribution([](RandomTape &t) {
        uint32_t a = t.choose("a", {rat(1, 4), rat(3, 4)});
        return SimOutcome{int(a), a == 0};
    });
    CHECK(dist[{0, true}] == rat(1, 4));
    CHECK(dist[{1, false}] == rat(3, 4));
}

TEST_CASE("monte carlo reports are reproducible") {
    auto trial = [](RandomTape &t) { return t.choose("coin", {rat(1, 2), rat(1, 2)}) == 1; };
    McReport a = monte_carlo(trial, 4000, 11);
    McReport b = monte_carlo(trial, 4000, 11);
    CHECK(a.successes == b.successes);
    CHECK(a.estimate == b.estimate);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    CHECK(a.violations == 0);
    CHECK(a.lo < 0.5);
    CHECK(a.hi > 0.5);

    auto broken = [](RandomTape &t) -> bool {
        if (t.choose("coin", {rat(1, 2), rat(1, 2)}) == 1)
            throw SimInvariantViolation("forced");
        return true;
    };
    McReport c = monte_carlo(broken, 100, 3);
    CHECK(c.violations > 0);
    CHECK(c.successes + c.violations == 100);
}

TEST_CASE("multicollision simulation on a depth zero tree") {
    Pdt t;
    t.nvars = 4;
    t.nodes.resize(1);
    t.nodes[0].leaf = true;
    t.nodes[0].abort = true;
    BlockLayout lay{2, 2};
    SeededTape tape(1);
    TcollResult res = sim_tcoll({0, 1, 2, 3}, 2, t, lay, tape);
    CHECK(!res.fail);
    CHECK(res.leaf == 0);
    CHECK(res.used.empty());
    CHECK(res.free_blocks == std::vector<uint32_t>{1, 2});
    CHECK(tape.events.empty());
}

TEST_CASE("single query on a one bit block keeps both holes") {
    BlockLayout lay{2, 1};
    Pdt t = one_query_tree(2, eq(2, {1}, false));
    auto dist = exact_outcome_distribution([&](RandomTape &tape) {
        TcollResult r = sim_tcoll({0, 1}, 2, t, lay, tape);
        CHECK(r.used.size() == 1);
        CHECK(r.used[0] == std::vector<uint32_t>{0, 1});
        CHECK(r.free_blocks == std::vector<uint32_t>{2});
        return SimOutcome{r.leaf, r.fail};
    });
    CHECK(fail_mass(dist) == 0);
    CHECK(dist[{1, false}] == rat(1, 2));
    CHECK(dist[{2, false}] == rat(1, 2));
}

TEST_CASE("simulation leaves match the uniform input distribution") {
    std::mt19937_64 rng(5);
    BlockLayout lay{3, 2};
    std::vector<std::vector<uint32_t>> hole_sets = {{0, 1, 2, 3}, {0, 1, 2}};
    for (const auto &holes : hole_sets) {
        for (int round = 0; round < 6; round++) {
            Pdt t = random_tree(lay.nvars(), 3, rng);
            auto sim = leaf_marginal(exact_outcome_distribution([&](RandomTape &tape) {
                TcollResult r = sim_tcoll(holes, 2, t, lay, tape);
                return SimOutcome{r.leaf, r.fail};
            }));
            auto inp = tcoll_input_distribution(t, lay, holes);
            CHECK(sim == inp);
        }
    }
}

TEST_CASE("multicollision invariants hold along random runs") {
    std::mt19937_64 rng(17);
    BlockLayout lay{4, 2};
    std::vector<uint32_t> holes = {0, 1, 2};
    for (uint64_t seed = 0; seed < 60; seed++) {
        Pdt t = random_tree(lay.nvars(), 4, rng);
        SeededTape tape(splitmix64(seed));
        TcollResult r = sim_tcoll(holes, 2, t, lay, tape);
        CHECK(r.transcript.steps.size() > 0);
        if (!r.fail) {
            for (uint32_t i1 = 1; i1 <= lay.m; i1++)
                for (uint32_t i2 = i1 + 1; i2 <= lay.m; i2++)
                    not_sink_witness_tcoll(r, holes, 2, {i1, i2}, t, lay);
        }
    }
}

TEST_CASE("three way collisions need a hole in three entries") {
    BlockLayout lay{3, 1};
    std::vector<uint32_t> holes = {0, 1};
    std::mt19937_64 rng(23);
    uint32_t fails = 0, runs = 0;
    for (uint64_t seed = 0; seed < 40; seed++) {
        Pdt t = random_tree(lay.nvars(), 3, rng);
        SeededTape tape(splitmix64(seed * 31 + 7));
        TcollResult r = sim_tcoll(holes, 3, t, lay, tape);
        runs++;
        if (r.fail) {
            fails++;
            std::map<uint32_t, uint32_t> load;
            for (const auto &e : r.used)
                for (uint32_t y : e) load[y]++;
            uint32_t top = 0;
            for (const auto &[y, c] : load) top = std::max(top, c);
            CHECK(top >= 3);
        }
    }
    CHECK(runs == 40);
    CHECK(fails < runs);
}

TEST_CASE("simulation replays exactly from a recorded tape") {
    std::mt19937_64 rng(29);
    BlockLayout lay{3, 2};
    Pdt t = random_tree(lay.nvars(), 3, rng);
    std::vector<uint32_t> holes = {0, 1, 3};

    SeededTape tape(424242);
    TcollResult a = sim_tcoll(holes, 2, t, lay, tape);
    std::vector<uint32_t> picks;
    for (const TapeEvent &e : tape.events) picks.push_back(e.pick);

    FixedTape replay(picks);
    TcollResult b = sim_tcoll(holes, 2, t, lay, replay);
    CHECK(format_transcript(a.transcript) == format_transcript(b.transcript));
    CHECK(a.leaf == b.leaf);
    CHECK(a.fail == b.fail);
    CHECK(a.used == b.used);
    CHECK(tape.weight() == replay.weight());

    SeededTape again(424242);
    TcollResult c = sim_tcoll(holes, 2, t, lay, again);
    CHECK(format_transcript(a.transcript) == format_transcript(c.transcript));
}

TEST_CASE("permutation simulation resolves column sums without sampling") {
    std::vector<uint32_t> S = {0, 1};
    Pdt t = one_query_tree(2, eq(2, {1, 2}, false));
    SeededTape tape(3);
    PermResult r = sim_perm(S, 1, t, tape);
    CHECK(tape.events.empty());
    CHECK(r.leaf == 2); // x11 + x21 = 1 on every permutation of {0,1}
    CHECK(!r.fail);
    CHECK(r.free_blocks == std::vector<uint32_t>{1, 2});
    REQUIRE(r.transcript.steps.size() == 1);
    CHECK(r.transcript.steps[0].note.find("determined by the column sums") != std::string::npos);
}

TEST_CASE("permutation simulation pairs the two holes on a direct query") {
    std::vector<uint32_t> S = {0, 1};
    Pdt t = one_query_tree(2, eq(2, {1}, false));
    auto dist = exact_outcome_distribution([&](RandomTape &tape) {
        PermResult r = sim_perm(S, 1, t, tape);
        CHECK(r.avail.empty());
        CHECK(r.free_blocks.empty());
        REQUIRE(r.pairs.size() == 1);
        CHECK(r.pairs[0].j == 1);
        return SimOutcome{r.leaf, r.fail};
    });
    CHECK(fail_mass(dist) == 0);
    CHECK(dist[{1, false}] == rat(1, 2));
    CHECK(dist[{2, false}] == rat(1, 2));
}

TEST_CASE("permutation leaves match the uniform permutation distribution") {
    std::mt19937_64 rng(41);
    std::vector<std::pair<uint32_t, std::vector<uint32_t>>> cases = {
        {1, {0, 0, 1}},
        {1, {0, 1, 1}},
        {2, {0, 1, 2}},
        {2, {0, 0, 3}},
    };
    for (const auto &[l, S] : cases) {
        BlockLayout lay{uint32_t(S.size()), l};
        for (int round = 0; round < 4; round++) {
            Pdt t = random_tree(lay.nvars(), 2, rng);
            auto sim = leaf_marginal(exact_outcome_distribution([&](RandomTape &tape) {
                PermResult r = sim_perm(S, l, t, tape);
                return SimOutcome{r.leaf, r.fail};
            }));
            auto inp = perm_input_distribution(t, l, S);
            CHECK(sim == inp);
        }
    }
}

TEST_CASE("a single wide query cannot fail on a fresh multiset") {
    std::vector<uint32_t> S = {0, 1, 2, 3, 0};
    Pdt t = one_query_tree(10, eq(10, {1}, false));
    auto dist = exact_outcome_distribution([&](RandomTape &tape) {
        PermResult r = sim_perm(S, 2, t, tape);
        return SimOutcome{r.leaf, r.fail};
    });
    CHECK(fail_mass(dist) == 0);
    auto sim = leaf_marginal(dist);
    auto inp = perm_input_distribution(t, 2, S);
    CHECK(sim == inp);
}

TEST_CASE("permutation invariants and witnesses on random runs") {
    std::mt19937_64 rng(53);
    std::vector<uint32_t> S = {0, 1, 2, 3, 1};
    BlockLayout lay{5, 2};
    uint32_t successes = 0;
    for (uint64_t seed = 0; seed < 50; seed++) {
        Pdt t = random_tree(lay.nvars(), 3, rng);
        SeededTape tape(splitmix64(seed * 101 + 13));
        PermResult r = sim_perm(S, 2, t, tape);
        if (r.fail) continue;
        successes++;
        check_perm_exhaustive(r, S, 2);
        if (r.avail.size() >= 3) {
            for (uint32_t i1 = 1; i1 <= lay.m; i1++)
                for (uint32_t i2 = i1 + 1; i2 <= lay.m; i2++)
                    not_sink_witness_perm(r, S, 2, i1, i2, t);
        }
    }
    CHECK(successes > 0);
}

TEST_CASE("permutation replay is deterministic") {
    std::vector<uint32_t> S = {0, 0, 2, 3};
    std::mt19937_64 rng(61);
    Pdt t = random_tree(8, 3, rng);
    SeededTape tape(777);
    PermResult a = sim_perm(S, 2, t, tape);
    std::vector<uint32_t> picks;
    for (const TapeEvent &e : tape.events) picks.push_back(e.pick);
    FixedTape replay(picks);
    PermResult b = sim_perm(S, 2, t, replay);
    CHECK(format_transcript(a.transcript) == format_transcript(b.transcript));
    CHECK(a.leaf == b.leaf);
    CHECK(a.fail == b.fail);
    CHECK(a.avail == b.avail);
}

TEST_CASE("lifted simulation matches the lifted input distribution") {
    Gadget g = gadget_bind(1);
    HardnessFamily fam = toy_family(2, 1);
    PartialVals rho = all_free(2);
    std::mt19937_64 rng(67);
    for (int round = 0; round < 5; round++) {
        Pdt t = random_tree(6, 2, rng);
        auto sim = leaf_marginal(exact_outcome_distribution([&](RandomTape &tape) {
            LiftResult r = sim_lift(rho, t, fam, g, tape);
            return SimOutcome{r.leaf, r.fail};
        }));
        auto inp = lift_input_distribution(t, rho, g);
        CHECK(sim == inp);
    }
}

TEST_CASE("lifted simulation respects a base restriction") {
    Gadget g = gadget_bind(1);
    HardnessFamily fam = toy_family(3, 1);
    PartialVals rho = all_free(3);
    rho[1] = 1; // block 2 pinned, tree must avoid it
    std::mt19937_64 rng(71);
    Pdt t;
    t.nvars = 9;
    t.nodes.resize(3);
    t.nodes[0].query = eq(9, {1, 7}, false); // bits of blocks 1 and 3
    t.nodes[0].child[0] = 1;
    t.nodes[0].child[1] = 2;
    t.nodes[1].leaf = t.nodes[2].leaf = true;

    auto sim = leaf_marginal(exact_outcome_distribution([&](RandomTape &tape) {
        LiftResult r = sim_lift(rho, t, fam, g, tape);
        CHECK(!r.sigma[1]);
        CHECK(r.z[1] == 1);
        return SimOutcome{r.leaf, r.fail};
    }));
    auto inp = lift_input_distribution(t, rho, g);
    CHECK(sim == inp);

    Pdt bad = one_query_tree(9, eq(9, {4}, false));
    SeededTape tape(1);
    CHECK_THROWS_AS(sim_lift(rho, bad, fam, g, tape), std::invalid_argument);
}

TEST_CASE("lifted simulation fails exactly when revealed values leave the set") {
    Gadget g = gadget_bind(1);
    // hard set: no revealed base value may be 1
    HardnessFamily fam = toy_family(2, 1, [](const PartialVals &tau) {
        for (const auto &v : tau)
            if (v && *v == 1) return false;
        return true;
    });
    PartialVals rho = all_free(2);
    Pdt t = one_query_tree(6, eq(6, {1}, false));
    auto dist = exact_outcome_distribution([&](RandomTape &tape) {
        LiftResult r = sim_lift(rho, t, fam, g, tape);
        REQUIRE(r.sigma[0]);
        CHECK(r.fail == (*r.sigma[0] == 1));
        return SimOutcome{r.leaf, r.fail};
    });
    // only block 1 is ever queried and z_1 is uniform
    CHECK(fail_mass(dist) == rat(1, 2));
}

TEST_CASE("lifted witnesses deny any candidate collision") {
    Gadget g = gadget_bind(1);
    SearchProblem base = coll_search(1, 2);
    HardnessFamily fam = toy_family(2, 1, [](const PartialVals &tau) {
        return !(tau[0] && tau[1] && *tau[0] == *tau[1]);
    });
    PartialVals rho = all_free(2);
    std::mt19937_64 rng(73);
    uint32_t successes = 0;
    for (uint64_t seed = 0; seed < 30; seed++) {
        Pdt t = random_tree(6, 2, rng);
        SeededTape tape(splitmix64(seed + 541));
        LiftResult r = sim_lift(rho, t, fam, g, tape);
        if (r.fail) continue;
        successes++;
        not_sink_witness_lift(r, rho, base, {1, 2}, fam, g, t);
    }
    CHECK(successes > 0);
}

TEST_CASE("lifted replay is deterministic") {
    Gadget g = gadget_bind(1);
    HardnessFamily fam = toy_family(2, 1);
    PartialVals rho = all_free(2);
    std::mt19937_64 rng(79);
    Pdt t = random_tree(6, 2, rng);
    SeededTape tape(31337);
    LiftResult a = sim_lift(rho, t, fam, g, tape);
    std::vector<uint32_t> picks;
    for (const TapeEvent &e : tape.events) picks.push_back(e.pick);
    FixedTape replay(picks);
    LiftResult b = sim_lift(rho, t, fam, g, replay);
    CHECK(format_transcript(a.transcript) == format_transcript(b.transcript));
    CHECK(a.z == b.z);
    CHECK(a.fail == b.fail);
}

TEST_CASE("balls and bins with no matching is the birthday bound") {
    BinsGraph g = hypercube_bins(2, {0, 1, 2, 3});
    CHECK(g.r == 4);
    CHECK(g.edges.size() == 4);
    Rat coll = 0;
    for_each_tape(
        [&](RandomTape &tape) {
            BallsResult r = balls_bins(g, empty_matching_strategy(), 2, 2, tape);
            if (r.t_collision) coll += tape.weight();
        },
        [](const RandomTape &) {});
    CHECK(coll == rat(1, 4));

    SeededTape tape(5);
    BallsResult r0 = balls_bins(g, empty_matching_strategy(), 0, 2, tape);
    CHECK(!r0.t_collision);
    CHECK(r0.occupancy == std::vector<uint32_t>(4, 0));
}

TEST_CASE("matched throws cover both endpoints") {
    BinsGraph g = hypercube_bins(1, {0, 1});
    SeededTape tape(9);
    BallsResult r = balls_bins(g, direction_strategy(1, {0, 1}), 1, 2, tape);
    CHECK(r.occupancy == std::vector<uint32_t>{1, 1});
    CHECK(!r.t_collision);
}

TEST_CASE("empty bin throws fill the graph then idle") {
    BinsGraph g = hypercube_bins(2, {0, 1, 2, 3});
    SeededTape tape(13);
    BallsResult r = balls_bins(g, empty_matching_strategy(), 5, 2, tape, BinsPick::empty_bins);
    CHECK(r.occupancy == std::vector<uint32_t>(4, 1));
    CHECK(!r.t_collision);
    CHECK(r.idle == 1);

    SeededTape tape2(13);
    BallsResult r2 =
        balls_bins(g, empty_matching_strategy(), 2, 2, tape2, BinsPick::nonempty_bins);
    CHECK(r2.idle == 2); // nothing is occupied, so no round is live
}

TEST_CASE("bin strategies must return matchings from the graph") {
    BinsGraph g = hypercube_bins(2, {0, 1, 2, 3});
    SeededTape tape(3);
    BinsStrategy offgraph = [](const BinsState &) {
        return std::vector<std::pair<uint32_t, uint32_t>>{{0, 3}};
    };
    CHECK_THROWS_AS(balls_bins(g, offgraph, 1, 2, tape), std::invalid_argument);
    BinsStrategy reuse = [](const BinsState &) {
        return std::vector<std::pair<uint32_t, uint32_t>>{{0, 1}, {1, 3}};
    };
    CHECK_THROWS_AS(balls_bins(g, reuse, 1, 2, tape), std::invalid_argument);
}

TEST_CASE("collision bins pair doubled strings with isolated copies") {
    BinsGraph g = coll_bins(2, {0, 1, 2, 3, 0});
    CHECK(g.r == 5);
    CHECK(g.paired == 1);
    CHECK(g.edges.size() == 4);
    CHECK(g.side.size() == 5);

    // one ball on the blue copy, one on the red copy
    BinsStrategy none = empty_matching_strategy();
    Rat both = 0;
    for_each_tape(
        [&](RandomTape &tape) {
            BallsResult r = balls_bins(g, none, 2, 2, tape);
            if (r.pair_collision) both += tape.weight();
        },
        [](const RandomTape &) {});
    CHECK(both == rat(2, 25));
}

TEST_CASE("invariant checks can be switched off for throughput") {
    std::mt19937_64 rng(83);
    BlockLayout lay{3, 2};
    Pdt t = random_tree(lay.nvars(), 3, rng);
    auto trial = [&](RandomTape &tape) {
        TcollResult r = sim_tcoll({0, 1, 2, 3}, 2, t, lay, tape, false);
        return !r.fail;
    };
    McReport rep = monte_carlo(trial, 500, 19);
    CHECK(rep.violations == 0);
    CHECK(rep.trials == 500);
}
