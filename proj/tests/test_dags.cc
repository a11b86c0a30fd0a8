#include "wb/dag.hh"

#include "test_util.hh"

#include <doctest.h>

using namespace wb;
using namespace wbt;

namespace {

// collision finder for 3 one-bit blocks with a dead fourth branch
AffineDag coll3_dag() {
    AffineDag d;
    d.nvars = 3;
    d.nodes.resize(7);
    auto q = [&](std::initializer_list<uint32_t> vars) { return Parity(vec_of(3, vars), false); };
    d.nodes[0].sys = LinSys(3);
    d.nodes[0].query = q({0, 1});
    d.nodes[0].child[0] = 1;
    d.nodes[0].child[1] = 2;
    d.nodes[1].sys = sys_of(3, {eq(3, {1, 2}, 0)});
    d.nodes[1].sink = true;
    d.nodes[1].label = {1, 2};
    d.nodes[2].sys = sys_of(3, {eq(3, {1, 2}, 1)});
    d.nodes[2].query = q({0, 2});
    d.nodes[2].child[0] = 3;
    d.nodes[2].child[1] = 4;
    d.nodes[3].sys = sys_of(3, {eq(3, {1, 2}, 1), eq(3, {1, 3}, 0)});
    d.nodes[3].sink = true;
    d.nodes[3].label = {1, 3};
    d.nodes[4].sys = sys_of(3, {eq(3, {1, 2}, 1), eq(3, {1, 3}, 1)});
    d.nodes[4].query = q({1, 2});
    d.nodes[4].child[0] = 5;
    d.nodes[4].child[1] = 6;
    d.nodes[5].sys = sys_of(3, {eq(3, {1, 2}, 1), eq(3, {1, 3}, 1), eq(3, {2, 3}, 0)});
    d.nodes[5].sink = true;
    d.nodes[5].label = {2, 3};
    d.nodes[6].sys = contradiction(3);
    d.nodes[6].sink = true;
    d.nodes[6].label = {1, 2};
    return d;
}

Pdt coll3_pdt() {
    Pdt t;
    t.nvars = 3;
    t.nodes.resize(5);
    t.nodes[0].query = Parity(vec_of(3, {0, 1}), false);
    t.nodes[0].child[0] = 1;
    t.nodes[0].child[1] = 2;
    t.nodes[1].leaf = true;
    t.nodes[1].label = {1, 2};
    t.nodes[2].query = Parity(vec_of(3, {0, 2}), false);
    t.nodes[2].child[0] = 3;
    t.nodes[2].child[1] = 4;
    t.nodes[3].leaf = true;
    t.nodes[3].label = {1, 3};
    t.nodes[4].leaf = true;
    t.nodes[4].label = {2, 3};
    return t;
}

// depth-3 tree querying the rows of a random invertible matrix level by
// level; every leaf pins a unique input
Pdt random_full_rank_pdt(std::mt19937_64 &rng) {
    std::vector<F2Vec> rows;
    while (true) {
        rows.clear();
        for (int r = 0; r < 3; r++) rows.push_back(random_vec(3, rng));
        if (dim_of(rows) == 3) break;
    }
    SearchProblem coll = coll_search(1, 3);
    Pdt t;
    t.nvars = 3;
    std::function<int(uint32_t, const LinSys &)> build = [&](uint32_t depth,
                                                             const LinSys &sys) -> int {
        int idx = int(t.nodes.size());
        t.nodes.emplace_back();
        if (depth == 3) {
            std::vector<F2Vec> sols = enumerate_solutions(sys);
            REQUIRE(sols.size() == 1);
            t.nodes[size_t(idx)].leaf = true;
            for (const Output &o : coll.outputs)
                if (coll.relation(blocks_of_vec(sols[0], coll.lay), o)) {
                    t.nodes[size_t(idx)].label = o;
                    break;
                }
            REQUIRE(!t.nodes[size_t(idx)].label.empty());
            return idx;
        }
        t.nodes[size_t(idx)].query = Parity(rows[depth], false);
        for (int b = 0; b < 2; b++) {
            LinSys next = sys;
            next.add(Parity(rows[depth], b != 0));
            int c = build(depth + 1, next);
            t.nodes[size_t(idx)].child[b] = c;
        }
        return idx;
    };
    build(0, LinSys(3));
    return t;
}

} // namespace

TEST_CASE("collision problems") {
    SearchProblem coll = coll_search(1, 3);
    CHECK(coll.outputs.size() == 3);
    CHECK(search_total(coll));
    CHECK(search_total(coll_search(2, 5)));
    CHECK(coll.member({0, 1, 0}, {1, 3}));
    CHECK(!coll.member({0, 1, 0}, {1, 2}));
    CHECK(!coll.member({0, 1, 0}, {3, 1})); // labels are sorted index lists

    CHECK(search_total(tcoll_search(1, 5, 3)));
    BlockVals counter;
    CHECK(!search_total(tcoll_search(1, 4, 3), &counter));
    CHECK(tcoll_search(1, 4, 3).in_promise(counter));

    SearchProblem pr = tcoll_promise_search(1, 3, 3, {0});
    CHECK(search_total(pr));
    CHECK(pr.member({0, 1, 0}, {1, 2, 3})); // promise violated, everything passes
    CHECK(!pr.member({0, 0, 0}, {1, 2}));   // wrong arity stays wrong on promise
}

TEST_CASE("sum and multiset promises") {
    SearchProblem cs = coll_sum_search(1, 5, {0, 1}, 1);
    CHECK(search_total(cs));
    CHECK(cs.in_promise({0, 0, 0, 0, 1}));
    CHECK(!cs.in_promise({0, 0, 0, 0, 0})); // sum is 0, promise wants 1

    BlockVals counter;
    SearchProblem hard = coll_sum_search(2, 3, {0, 1, 2, 3}, 0);
    CHECK(!search_total(hard, &counter));
    CHECK(hard.in_promise(counter));

    SearchProblem ms = coll_multiset_search(1, {0, 0, 1});
    CHECK(search_total(ms));
    CHECK(ms.in_promise({0, 1, 0}));
    CHECK(!ms.in_promise({1, 1, 0}));
    CHECK(!search_total(coll_multiset_search(2, {0, 1, 2})));
}

TEST_CASE("false clause search") {
    SearchProblem fc = false_clause_search(gen_bphp(1, 3));
    CHECK(fc.outputs.size() == 6);
    CHECK(search_total(fc));

    CnfFormula sat(BlockLayout(2, 1));
    sat.add_clause({1, 2});
    BlockVals counter;
    CHECK(!search_total(false_clause_search(sat), &counter));
    CHECK((counter == BlockVals{1, 0} || counter == BlockVals{0, 1} ||
           counter == BlockVals{1, 1}));
}

TEST_CASE("lifted search problems") {
    SearchProblem base = coll_search(1, 3);
    SearchProblem lifted = lift_search(base, gadget_maj3());
    CHECK(lifted.lay == BlockLayout(3, 3));
    CHECK(search_total(lifted));
    // blocks 3 and 5 decode under majority to 1, block 0 to 0
    CHECK(lifted.member({3, 0, 5}, {1, 3}));
    CHECK(!lifted.member({3, 0, 5}, {1, 2}));

    CHECK_THROWS_AS(lift_search(coll_search(2, 3), gadget_maj3()), std::invalid_argument);
}

TEST_CASE("pdt runs and traces") {
    Pdt t = coll3_pdt();
    CHECK(t.depth() == 2);
    CHECK(t.run(vec_of(3, {})) == 1);
    CHECK(t.run(vec_of(3, {0})) == 4);  // x = 100: x1+x2 = 1, x1+x3 = 1
    CHECK(t.run(vec_of(3, {0, 2})) == 3); // x = 101

    PdtTrace tr = run_pdt_trace(t, vec_of(3, {0}));
    CHECK(tr.leaf == 4);
    CHECK(tr.path.eqs.size() == 2);
    CHECK(tr.path.sat(vec_of(3, {0})));

    CHECK(pdt_solves(t, coll_search(1, 3)));
    Pdt bad = coll3_pdt();
    std::swap(bad.nodes[1].label, bad.nodes[3].label);
    BlockVals counter;
    CHECK(!pdt_solves(bad, coll_search(1, 3), &counter));
}

TEST_CASE("hand built dag verifies with a dead sink warning") {
    AffineDag d = coll3_dag();
    CHECK(d.size() == 7);
    CHECK(d.depth() == 3);
    DagReport rep = verify_affine_dag(d, coll_search(1, 3));
    CHECK(rep.ok);
    REQUIRE(rep.warnings.size() == 1);
    CHECK(rep.warnings[0].find("sink 6") != std::string::npos);

    AffineDag bad = coll3_dag();
    std::swap(bad.nodes[1].label, bad.nodes[3].label);
    DagReport brep = verify_affine_dag(bad, coll_search(1, 3));
    CHECK(!brep.ok);
    CHECK(brep.where >= 0);
    CHECK(bad.nodes[size_t(brep.where)].sys.sat(brep.countermodel));
}

TEST_CASE("verifier rejects structural damage") {
    SearchProblem coll = coll_search(1, 3);

    AffineDag two_sources = coll3_dag();
    two_sources.nodes.push_back(two_sources.nodes[1]); // unreferenced copy
    CHECK(verify_affine_dag(two_sources, coll).error == "second source");

    AffineDag rooted = coll3_dag();
    rooted.nodes[0].sys = sys_of(3, {eq(3, {1}, 0)});
    CHECK(verify_affine_dag(rooted, coll).error == "root system not empty");

    AffineDag cyc = coll3_dag();
    cyc.nodes[4].child[1] = 0;
    CHECK(!verify_affine_dag(cyc, coll).ok);

    AffineDag weak = coll3_dag();
    weak.nodes[3].sys = sys_of(3, {eq(3, {1, 2}, 0), eq(3, {1, 3}, 0)});
    DagReport rep = verify_affine_dag(weak, coll);
    CHECK(!rep.ok);
    CHECK(rep.error.find("does not imply") != std::string::npos);
}

TEST_CASE("promise violations never hurt sink soundness") {
    AffineDag d;
    d.nvars = 2;
    d.nodes.resize(1);
    d.nodes[0].sys = LinSys(2);
    d.nodes[0].sink = true;
    d.nodes[0].label = {1, 2};
    // promise forces both blocks to 0, so the lone sink is correct
    CHECK(verify_affine_dag(d, tcoll_promise_search(1, 2, 2, {0})).ok);
    // without the promise the input 01 is a countermodel
    DagReport rep = verify_affine_dag(d, coll_search(1, 2));
    CHECK(!rep.ok);
    CHECK(!rep.countermodel.is_zero());
}

TEST_CASE("restriction examples") {
    AffineDag d = coll3_dag();
    BlockLayout lay(3, 1);
    SearchProblem coll = coll_search(1, 3);

    AffRestr empty(3);
    AffineDag same = apply_restriction(d, empty, lay);
    for (size_t v = 0; v < d.size(); v++) {
        CHECK(row_reduce(same.nodes[v].sys) == row_reduce(d.nodes[v].sys));
        if (!d.nodes[v].sink) CHECK(same.nodes[v].query == d.nodes[v].query);
    }

    // full bit-fixing: the restricted walk from any input equals evaluation
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; trial++) {
        AffRestr fix(3);
        F2Vec y = random_vec(3, rng);
        for (uint32_t v = 0; v < 3; v++) fix.fix_const(v, y.get(v));
        AffineDag df = apply_restriction(d, fix, lay);
        CHECK(df.run(random_vec(3, rng)) == d.run(y));
    }

    // affine block fixing x3 := x1 stays verified against the restricted problem
    AffRestr rho(3);
    rho.fix(2, Parity(vec_of(3, {0}), false));
    AffineDag dr = apply_restriction(d, rho, lay);
    DagReport rep = verify_affine_dag(dr, restrict_search(coll, rho));
    CHECK(rep.ok);

    AffRestr partial(3); // not block-respecting on 1-bit blocks is impossible;
    partial.fix(1, Parity(vec_of(3, {0}), true));
    CHECK_NOTHROW(apply_restriction(d, partial, lay));
    BlockLayout wide(1, 3); // one 3-bit block, fixing one bit breaks the shape
    CHECK_THROWS_AS(apply_restriction(d, partial, wide), std::invalid_argument);
}

TEST_CASE("truncation to a pdt") {
    AffineDag d = coll3_dag();
    Pdt t0 = truncate_to_pdt(d, 0, 0);
    CHECK(t0.nodes.size() == 1);
    CHECK(t0.nodes[0].abort);
    CHECK(t0.nodes[0].dag_node == 0);

    Pdt t2 = truncate_to_pdt(d, 0, 2);
    CHECK(t2.depth() == 2);
    uint32_t aborts = 0, labeled = 0;
    for (const auto &nd : t2.nodes)
        if (nd.leaf) (nd.abort ? aborts : labeled)++;
    CHECK(aborts == 1);  // only the node-4 cut
    CHECK(labeled == 2); // sinks 1 and 3

    // chain with both child slots aimed at the next node
    AffineDag chain;
    chain.nvars = 2;
    chain.nodes.resize(4);
    chain.nodes[0].sys = LinSys(2);
    chain.nodes[0].query = Parity(vec_of(2, {0}), false);
    chain.nodes[0].child[0] = chain.nodes[0].child[1] = 1;
    chain.nodes[1].sys = LinSys(2);
    chain.nodes[1].query = Parity(vec_of(2, {1}), false);
    chain.nodes[1].child[0] = chain.nodes[1].child[1] = 2;
    chain.nodes[2].sys = LinSys(2);
    chain.nodes[2].query = Parity(vec_of(2, {0, 1}), false);
    chain.nodes[2].child[0] = chain.nodes[2].child[1] = 3;
    chain.nodes[3].sys = LinSys(2);
    chain.nodes[3].sink = true;
    chain.nodes[3].label = {1};
    Pdt ct = truncate_to_pdt(chain, 0, 2);
    CHECK(ct.depth() == 2);
    uint32_t dup = 0;
    for (const auto &nd : ct.nodes)
        if (nd.leaf) {
            CHECK(nd.dag_node == 2);
            dup++;
        }
    CHECK(dup == 4); // the depth-2 node is shared in the DAG, duplicated here
}

TEST_CASE("path systems and implications") {
    AffineDag d = coll3_dag();
    CHECK(path_system(d, 0, {}).eqs.empty());
    CHECK(check_path_implication(d, 0, {}));

    LinSys psi = path_system(d, 0, {true, false});
    CHECK(psi.eqs.size() == 2);
    CHECK(check_path_implication(d, 0, {true, false}));
    CHECK(check_path_implication(d, 0, {true, true, true}));
    CHECK(check_path_implication(d, 2, {false}));

    AffineDag bad = coll3_dag();
    bad.nodes[3].sys = sys_of(3, {eq(3, {1, 2}, 0), eq(3, {1, 3}, 0)});
    CHECK(!check_path_implication(bad, 0, {true, false}));

    CHECK_THROWS_AS(path_system(d, 0, {false, false}), std::invalid_argument);
}

TEST_CASE("pdt converts to a treelike dag") {
    SearchProblem coll = coll_search(1, 3);
    Pdt t = coll3_pdt();
    AffineDag d = pdt_to_treelike_dag(t, coll);
    CHECK(d.size() == t.nodes.size());
    CHECK(d.depth() == t.depth());
    CHECK(verify_affine_dag(d, coll).ok);

    Pdt bad = coll3_pdt();
    std::swap(bad.nodes[1].label, bad.nodes[3].label);
    CHECK_THROWS_AS(pdt_to_treelike_dag(bad, coll), std::invalid_argument);

    // single query over one variable against its own false clause search
    CnfFormula contra(BlockLayout(1, 1));
    contra.add_clause({1});
    contra.add_clause({-1});
    Pdt one;
    one.nvars = 1;
    one.nodes.resize(3);
    one.nodes[0].query = Parity(vec_of(1, {0}), false);
    one.nodes[0].child[0] = 1;
    one.nodes[0].child[1] = 2;
    one.nodes[1].leaf = true;
    one.nodes[1].label = {1};
    one.nodes[2].leaf = true;
    one.nodes[2].label = {2};
    AffineDag refut = pdt_to_treelike_dag(one, false_clause_search(contra));
    CHECK(refut.size() == 3);
    CHECK(verify_affine_dag(refut, false_clause_search(contra)).ok);
}

TEST_CASE("random full rank pdts round through dags and restrictions") {
    std::mt19937_64 rng(17);
    SearchProblem coll = coll_search(1, 3);
    BlockLayout lay(3, 1);
    for (int trial = 0; trial < 40; trial++) {
        Pdt t = random_full_rank_pdt(rng);
        AffineDag d = pdt_to_treelike_dag(t, coll);
        CHECK(verify_affine_dag(d, coll).ok);

        // every root-to-node branch satisfies the path implication
        for (uint32_t mask = 0; mask < 8; mask++)
            for (uint32_t len = 0; len <= 3; len++) {
                std::vector<bool> branch;
                for (uint32_t k = 0; k < len; k++) branch.push_back((mask >> k) & 1);
                CHECK(check_path_implication(d, 0, branch));
            }

        AffRestr rho(3);
        rho.fix(2, Parity(vec_of(3, {uint32_t(rng() % 2)}), rng() & 1));
        AffineDag dr = apply_restriction(d, rho, lay);
        CHECK(verify_affine_dag(dr, restrict_search(coll, rho)).ok);
    }
}

TEST_CASE("dag text format round trips") {
    AffineDag d = coll3_dag();
    BlockLayout lay(3, 1);
    std::string txt = format_dag(d, lay);
    CHECK(txt.find("node 1 sink 1,2 system: v1 v2 = 0\n") != std::string::npos);
    CHECK(txt.find("edge 0 1 v1 v2 = 0\n") != std::string::npos);

    BlockLayout lay2(1, 1);
    AffineDag back = parse_dag(txt, &lay2);
    CHECK(lay2 == lay);
    CHECK(format_dag(back, lay2) == txt);
    CHECK(verify_affine_dag(back, coll_search(1, 3)).ok);

    // ids need not be dense or rooted at zero
    std::string scrambled =
        "# scrambled ids\nblocks m=2 l=1\n"
        "node 7 system:\n"
        "node 3 sink 1,2 system: v1 v2 = 0\n"
        "node 9 sink 1,2 system: v1 v2 = 1\n"
        "edge 7 3 v1 v2 = 0\n"
        "edge 7 9 v1 v2 = 1\n";
    AffineDag s = parse_dag(scrambled);
    CHECK(s.size() == 3);
    CHECK(!s.nodes[0].sink);
    // node 9 wrongly claims a collision; the verifier must catch it
    CHECK(!verify_affine_dag(s, coll_search(1, 2)).ok);

    CHECK_THROWS_WITH(parse_dag("blocks m=2 l=1\nnode 0 system:\nedge 0 1 v1 = 0\n"),
                      doctest::Contains("unknown node"));
    CHECK_THROWS_WITH(parse_dag("blocks m=2 l=1\nnode 0 system:\nnode 1 sink 1,2 system:\n"
                                "edge 0 1 v1 = 0\n"),
                      doctest::Contains("exactly 2 edges"));
    CHECK_THROWS_WITH(parse_dag("nonsense\n"), doctest::Contains("line 1"));
}
