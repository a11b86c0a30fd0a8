#include "wb/search.hh"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace wb {

BlockVals blocks_of_vec(const F2Vec &x, const BlockLayout &lay) {
    BlockVals vals(lay.m);
    for (uint32_t i = 1; i <= lay.m; i++) vals[i - 1] = lay.get_block(x, i);
    return vals;
}

F2Vec vec_of_blocks(const BlockVals &vals, const BlockLayout &lay) {
    F2Vec x(lay.nvars());
    for (uint32_t i = 1; i <= lay.m; i++) lay.set_block(x, i, vals[i - 1]);
    return x;
}

namespace {

std::vector<Output> subsets_of_size(uint32_t m, uint32_t t) {
    std::vector<Output> out;
    Output idx(t);
    for (uint32_t r = 0; r < t; r++) idx[r] = r + 1;
    if (t == 0 || t > m) return out;
    while (true) {
        out.push_back(idx);
        int r = int(t) - 1;
        while (r >= 0 && idx[uint32_t(r)] == m - t + uint32_t(r) + 1) r--;
        if (r < 0) break;
        idx[uint32_t(r)]++;
        for (uint32_t u = uint32_t(r) + 1; u < t; u++) idx[u] = idx[u - 1] + 1;
    }
    return out;
}

bool all_equal_on(const BlockVals &x, const Output &idx) {
    for (size_t k = 1; k < idx.size(); k++)
        if (x[idx[k] - 1] != x[idx[0] - 1]) return false;
    return true;
}

bool valid_subset_output(const Output &o, uint32_t m, uint32_t t) {
    if (o.size() != t) return false;
    for (size_t k = 0; k < o.size(); k++) {
        if (o[k] < 1 || o[k] > m) return false;
        if (k && o[k] <= o[k - 1]) return false;
    }
    return true;
}

} // namespace

SearchProblem tcoll_search(uint32_t l, uint32_t m, uint32_t t) {
    if (t < 2 || t > m) throw std::invalid_argument("tcoll_search: bad t");
    SearchProblem r;
    r.name = std::to_string(t) + "-coll";
    r.lay = BlockLayout(m, l);
    r.outputs = subsets_of_size(m, t);
    r.relation = [m, t](const BlockVals &x, const Output &o) {
        return valid_subset_output(o, m, t) && all_equal_on(x, o);
    };
    return r;
}

SearchProblem coll_search(uint32_t l, uint32_t m) {
    SearchProblem r = tcoll_search(l, m, 2);
    r.name = "coll";
    return r;
}

SearchProblem tcoll_promise_search(uint32_t l, uint32_t m, uint32_t t,
                                   std::vector<uint32_t> allowed) {
    SearchProblem r = tcoll_search(l, m, t);
    r.name += "-promise";
    uint32_t n = uint32_t(1) << l;
    for (uint32_t y : allowed)
        if (y >= n) throw std::invalid_argument("tcoll_promise_search: hole out of range");
    r.promise = [allowed = std::move(allowed)](const BlockVals &x) {
        for (uint32_t v : x)
            if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) return false;
        return true;
    };
    return r;
}

SearchProblem coll_sum_search(uint32_t l, uint32_t m, std::vector<uint32_t> allowed,
                              uint32_t z) {
    SearchProblem r = tcoll_search(l, m, 2);
    r.name = "coll-sum";
    uint32_t n = uint32_t(1) << l;
    if (z >= n) throw std::invalid_argument("coll_sum_search: z out of range");
    for (uint32_t y : allowed)
        if (y >= n) throw std::invalid_argument("coll_sum_search: hole out of range");
    r.promise = [allowed = std::move(allowed), z](const BlockVals &x) {
        uint32_t s = 0;
        for (uint32_t v : x) {
            if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) return false;
            s ^= v;
        }
        return s == z;
    };
    return r;
}

SearchProblem coll_multiset_search(uint32_t l, std::vector<uint32_t> multiset) {
    uint32_t m = uint32_t(multiset.size());
    SearchProblem r = tcoll_search(l, m, 2);
    r.name = "coll-multiset";
    std::map<uint32_t, uint32_t> want;
    for (uint32_t y : multiset) {
        if (y >= (uint32_t(1) << l))
            throw std::invalid_argument("coll_multiset_search: string out of range");
        want[y]++;
    }
    r.promise = [want = std::move(want)](const BlockVals &x) {
        std::map<uint32_t, uint32_t> got;
        for (uint32_t v : x) got[v]++;
        return got == want;
    };
    return r;
}

SearchProblem false_clause_search(const CnfFormula &phi) {
    SearchProblem r;
    r.name = "false-clause";
    r.lay = phi.lay;
    for (uint32_t c = 1; c <= phi.clauses.size(); c++) r.outputs.push_back({c});
    uint32_t nv = phi.nvars();
    auto clauses = phi.clauses;
    r.relation = [clauses = std::move(clauses), nv,
                  lay = phi.lay](const BlockVals &xb, const Output &o) {
        if (o.size() != 1 || o[0] < 1 || o[0] > clauses.size()) return false;
        F2Vec x = vec_of_blocks(xb, lay);
        std::vector<bool> bits(nv);
        for (uint32_t v = 0; v < nv; v++) bits[v] = x.get(v);
        return !eval_clause(clauses[o[0] - 1], bits);
    };
    return r;
}

SearchProblem lift_search(const SearchProblem &base, const Gadget &g) {
    if (g.out_bits != base.lay.l)
        throw std::invalid_argument("lift_search: gadget output width mismatch");
    SearchProblem r;
    r.name = base.name + "*" + g.name;
    r.lay = BlockLayout(base.lay.m, g.arity);
    r.outputs = base.outputs;
    Gadget gc = g;
    SearchProblem bc = base;
    auto decode = [gc](const BlockVals &x) {
        BlockVals y(x.size());
        for (size_t i = 0; i < x.size(); i++) y[i] = gc.eval(x[i]);
        return y;
    };
    if (base.promise)
        r.promise = [bc, decode](const BlockVals &x) { return bc.in_promise(decode(x)); };
    r.relation = [bc, decode](const BlockVals &x, const Output &o) {
        return bc.relation(decode(x), o);
    };
    return r;
}

bool block_respecting(const AffRestr &rho, const BlockLayout &lay) {
    if (rho.n != lay.nvars()) return false;
    for (uint32_t i = 1; i <= lay.m; i++) {
        uint32_t fixed = 0;
        for (uint32_t j = 1; j <= lay.l; j++) fixed += rho.fixed.count(lay.var(i, j));
        if (fixed != 0 && fixed != lay.l) return false;
    }
    for (const auto &[v, p] : rho.fixed)
        for (uint32_t c : p.form.ones())
            if (rho.fixed.count(c)) return false;
    return true;
}

std::vector<uint32_t> fixed_blocks(const AffRestr &rho, const BlockLayout &lay) {
    std::vector<uint32_t> out;
    for (uint32_t i = 1; i <= lay.m; i++)
        if (rho.fixed.count(lay.var(i, 1))) out.push_back(i);
    return out;
}

F2Vec extend_by_restriction(const F2Vec &x, const AffRestr &rho) {
    return rho.extend(x);
}

SearchProblem restrict_search(const SearchProblem &base, const AffRestr &rho) {
    if (!block_respecting(rho, base.lay))
        throw std::invalid_argument("restrict_search: restriction not block-respecting");
    SearchProblem r;
    r.name = base.name + "|rho";
    r.lay = base.lay;
    r.outputs = base.outputs;
    SearchProblem bc = base;
    AffRestr rc = rho;
    if (base.promise)
        r.promise = [bc, rc](const BlockVals &x) {
            F2Vec y = extend_by_restriction(vec_of_blocks(x, bc.lay), rc);
            return bc.in_promise(blocks_of_vec(y, bc.lay));
        };
    r.relation = [bc, rc](const BlockVals &x, const Output &o) {
        F2Vec y = extend_by_restriction(vec_of_blocks(x, bc.lay), rc);
        return bc.relation(blocks_of_vec(y, bc.lay), o);
    };
    return r;
}

namespace {

template <typename Fn>
bool walk_promise_inputs(const SearchProblem &r, uint64_t cap, Fn fn) {
    uint32_t m = r.lay.m;
    uint64_t per = uint64_t(1) << r.lay.l;
    uint64_t bits = uint64_t(m) * r.lay.l;
    if (bits > 62 || (uint64_t(1) << bits) > cap) throw EnumCapExceeded(bits);
    BlockVals x(m, 0);
    while (true) {
        if (r.in_promise(x) && !fn(x)) return false;
        uint32_t i = 0;
        while (i < m && ++x[i] == per) x[i++] = 0;
        if (i == m) break;
    }
    return true;
}

} // namespace

bool search_total(const SearchProblem &r, BlockVals *counter, uint64_t cap) {
    return walk_promise_inputs(r, cap, [&](const BlockVals &x) {
        for (const Output &o : r.outputs)
            if (r.relation(x, o)) return true;
        if (counter) *counter = x;
        return false;
    });
}

uint32_t Pdt::depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::pair<int, uint32_t>> stack{{0, 0}};
    uint32_t best = 0;
    while (!stack.empty()) {
        auto [v, d] = stack.back();
        stack.pop_back();
        const Node &nd = nodes[size_t(v)];
        if (nd.leaf) {
            best = std::max(best, d);
            continue;
        }
        stack.push_back({nd.child[0], d + 1});
        stack.push_back({nd.child[1], d + 1});
    }
    return best;
}

int Pdt::run(const F2Vec &x) const {
    int v = 0;
    while (!nodes[size_t(v)].leaf) {
        const Node &nd = nodes[size_t(v)];
        v = nd.child[nd.query.eval(x) ? 1 : 0];
    }
    return v;
}

PdtTrace run_pdt_trace(const Pdt &t, const F2Vec &x) {
    PdtTrace tr;
    tr.path = LinSys(t.nvars);
    int v = 0;
    while (!t.nodes[size_t(v)].leaf) {
        const Pdt::Node &nd = t.nodes[size_t(v)];
        bool beta = nd.query.eval(x);
        tr.path.add(outcome_equation(nd.query, beta));
        v = nd.child[beta ? 1 : 0];
    }
    tr.leaf = v;
    return tr;
}

bool pdt_solves(const Pdt &t, const SearchProblem &r, BlockVals *counter, uint64_t cap) {
    return walk_promise_inputs(r, cap, [&](const BlockVals &x) {
        F2Vec v = vec_of_blocks(x, r.lay);
        const Pdt::Node &leaf = t.nodes[size_t(t.run(v))];
        if (!leaf.abort && r.relation(x, leaf.label)) return true;
        if (counter) *counter = x;
        return false;
    });
}

} // namespace wb
