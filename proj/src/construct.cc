#include "wb/construct.hh"

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

namespace wb {

namespace {

F2Vec and_vec(const F2Vec &a, const F2Vec &b) {
    F2Vec out = a;
    for (size_t k = 0; k < out.w.size(); k++) out.w[k] &= b.w[k];
    return out;
}

F2Vec andnot_vec(const F2Vec &a, const F2Vec &b) {
    F2Vec out = a;
    for (size_t k = 0; k < out.w.size(); k++) out.w[k] &= ~b.w[k];
    return out;
}

F2Vec blocks_mask(const BlockLayout &lay, const std::vector<uint32_t> &blocks) {
    F2Vec m(lay.nvars());
    for (uint32_t i : blocks)
        for (uint32_t j = 1; j <= lay.l; j++) m.set(lay.var(i, j), true);
    return m;
}

F2Vec unit_form(uint32_t n, uint32_t v) {
    F2Vec f(n);
    f.set(v, true);
    return f;
}

std::vector<uint32_t> sorted_unique(std::vector<uint32_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

bool has(const std::vector<uint32_t> &sorted, uint32_t x) {
    return std::binary_search(sorted.begin(), sorted.end(), x);
}

std::vector<uint32_t> set_minus(const std::vector<uint32_t> &a, const std::vector<uint32_t> &b) {
    std::vector<uint32_t> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::vector<uint32_t> set_inter(const std::vector<uint32_t> &a, const std::vector<uint32_t> &b) {
    std::vector<uint32_t> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::vector<uint32_t> set_union2(const std::vector<uint32_t> &a, const std::vector<uint32_t> &b) {
    std::vector<uint32_t> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::vector<uint32_t> all_blocks(uint32_t m) {
    std::vector<uint32_t> v(m);
    std::iota(v.begin(), v.end(), 1u);
    return v;
}

std::string join_u32(const std::vector<uint32_t> &v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); i++) os << (i ? " " : "") << v[i];
    return os.str();
}

// Rows with the span of the input system, reduced so the parts inside mask
// form an RREF basis; positions outside the mask ride along symbolically.
struct MRow {
    F2Vec mf;    // part inside the mask
    Parity full; // the whole equation
    int pivot = -1;
};

void mrow_xor(MRow &a, const MRow &b) {
    a.mf ^= b.mf;
    a.full.form ^= b.full.form;
    a.full.constant ^= b.full.constant;
}

std::vector<MRow> masked_rref(const std::vector<Parity> &rows, const F2Vec &mask) {
    std::vector<MRow> out;
    for (const Parity &e : rows) {
        MRow r{and_vec(e.form, mask), e, -1};
        for (const MRow &q : out)
            if (r.mf.get(uint32_t(q.pivot))) mrow_xor(r, q);
        r.pivot = r.mf.lowest();
        if (r.pivot < 0) {
            if (r.full.form.any() || r.full.constant)
                throw AuditError("masked reduction: a combination vanished on the active "
                                 "columns without being trivial");
            continue;
        }
        for (MRow &q : out)
            if (q.mf.get(uint32_t(r.pivot))) mrow_xor(q, r);
        out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(),
              [](const MRow &a, const MRow &b) { return a.pivot < b.pivot; });
    return out;
}

std::optional<Parity> masked_solve(const std::vector<MRow> &rref, F2Vec target, uint32_t n) {
    Parity acc{F2Vec(n), false};
    for (const MRow &q : rref)
        if (target.get(uint32_t(q.pivot))) {
            target ^= q.mf;
            acc.form ^= q.full.form;
            acc.constant ^= q.full.constant;
        }
    if (target.any()) return std::nullopt;
    return acc;
}

// Basis of the span elements whose masked part lies inside sub_mask.
std::vector<MRow> rows_within(const std::vector<MRow> &rref, const F2Vec &sub_mask) {
    std::vector<MRow> outside, basis;
    for (const MRow &row : rref) {
        MRow r = row;
        for (const MRow &q : outside)
            if (r.mf.get(uint32_t(q.pivot))) mrow_xor(r, q);
        F2Vec ob = andnot_vec(r.mf, sub_mask);
        int op = ob.lowest();
        if (op >= 0) {
            r.pivot = op;
            for (MRow &q : outside)
                if (q.mf.get(uint32_t(op))) mrow_xor(q, r);
            outside.push_back(std::move(r));
        } else {
            if (!r.mf.any())
                throw AuditError("subspace extraction: masked rows went dependent");
            basis.push_back(std::move(r));
        }
    }
    return basis;
}

void for_each_subset(const std::vector<uint32_t> &pool, uint32_t sz,
                     const std::function<void(const std::vector<uint32_t> &)> &fn) {
    if (sz == 0 || sz > pool.size()) return;
    std::vector<uint32_t> idx(sz);
    std::iota(idx.begin(), idx.end(), 0u);
    std::vector<uint32_t> sub(sz);
    for (;;) {
        for (uint32_t t = 0; t < sz; t++) sub[t] = pool[idx[t]];
        fn(sub);
        uint32_t t = sz;
        while (t > 0 && idx[t - 1] == pool.size() - sz + (t - 1)) t--;
        if (t == 0) return;
        idx[t - 1]++;
        for (uint32_t u = t; u < sz; u++) idx[u] = idx[u - 1] + 1;
    }
}

struct SubsetScan {
    std::vector<std::vector<uint32_t>> importants; // dim V_S >= |S|
    std::vector<std::vector<uint32_t>> nears;      // dim V_S >= |S| - 1
};

SubsetScan scan_subsets(const std::vector<MRow> &rref, const BlockLayout &lay,
                        const std::vector<uint32_t> &act, uint32_t rcur) {
    SubsetScan out;
    if (act.size() < 2) return out;
    uint32_t cap = std::min<uint32_t>(rcur + 1, uint32_t(act.size()) - 1);
    for (uint32_t sz = 1; sz <= cap; sz++) {
        for_each_subset(act, sz, [&](const std::vector<uint32_t> &sub) {
            uint32_t dim = uint32_t(rows_within(rref, blocks_mask(lay, sub)).size());
            if (dim >= sub.size()) {
                if (sub.size() > rcur)
                    throw AuditError("pivot search: an important set exceeds the rank bound");
                out.importants.push_back(sub);
            }
            if (dim + 1 >= sub.size()) out.nears.push_back(sub);
        });
    }
    return out;
}

void pair_substitute(std::vector<Parity> &rows, const BlockLayout &lay, uint32_t ip,
                     uint32_t i, uint32_t j) {
    uint32_t from = lay.var(ip, j), to = lay.var(i, j);
    for (Parity &row : rows) {
        if (!row.form.get(from)) continue;
        row.form.set(from, false);
        row.form.flip(to);
        row.constant = !row.constant;
    }
}

void prune_rows(std::vector<Parity> &rows, const char *who) {
    std::vector<Parity> keep;
    for (const Parity &row : rows) {
        if (!row.form.any()) {
            if (row.constant)
                throw AuditError(std::string(who) + ": a contradiction surfaced during elimination");
            continue;
        }
        keep.push_back(row);
    }
    rows = std::move(keep);
}

AuditError flatness_error(const char *who, const std::exception &e) {
    return AuditError(std::string(who) + ": assembled restriction lost flatness (" + e.what() + ")");
}

// Solve the listed columns out of the system: afterwards each column owns one
// equation, every other row is trivial, and the returned values avoid the
// given forbidden blocks.
std::map<uint32_t, Parity> solve_pivot_columns(std::vector<Parity> rows,
                                               const std::vector<uint32_t> &cols,
                                               const std::vector<uint32_t> &forbidden,
                                               const BlockLayout &lay, const char *who) {
    prune_rows(rows, who);
    std::map<uint32_t, Parity> out;
    std::vector<char> used(rows.size(), 0);
    for (uint32_t w : cols) {
        size_t found = rows.size();
        for (size_t a = 0; a < rows.size(); a++)
            if (!used[a] && rows[a].form.get(w)) {
                found = a;
                break;
            }
        if (found == rows.size())
            throw AuditError(std::string(who) + ": a pivot column vanished from the system");
        used[found] = 1;
        for (size_t a = 0; a < rows.size(); a++)
            if (a != found && rows[a].form.get(w)) {
                rows[a].form ^= rows[found].form;
                rows[a].constant = rows[a].constant != rows[found].constant;
            }
    }
    for (size_t a = 0; a < rows.size(); a++) {
        if (used[a]) continue;
        if (rows[a].form.any() || rows[a].constant)
            throw AuditError(std::string(who) + ": residual equations beyond the pivots");
    }
    for (uint32_t w : cols) {
        for (size_t a = 0; a < rows.size(); a++) {
            if (!used[a] || !rows[a].form.get(w)) continue;
            Parity val{rows[a].form ^ unit_form(lay.nvars(), w), rows[a].constant};
            for (uint32_t v : val.form.ones())
                if (has(forbidden, lay.block_of(v)))
                    throw AuditError(std::string(who) +
                                     ": a solved value references a fixed block");
            out[w] = val;
            used[a] = 0;
            break;
        }
    }
    if (out.size() != cols.size())
        throw AuditError(std::string(who) + ": pivot columns shared an equation");
    return out;
}

} // namespace

std::pair<Rat, Rat> rat_exp_bounds(const Rat &x, uint32_t terms) {
    if (x < 0) throw PreconditionError("rat_exp_bounds: negative argument");
    if (terms < 4) terms = 4;
    if (terms & 1) terms++;
    uint32_t sq = 0;
    Rat y = x;
    while (y > 1) {
        y /= 2;
        sq++;
    }
    Rat s = 0, t = 1, lo = 0, hi = 1;
    for (uint32_t i = 0; i < terms; i++) {
        s += t;
        if (i % 2 == 0) hi = s;
        else lo = s;
        t = t * (-y) / long(i + 1);
    }
    if (lo < 0) lo = 0;
    for (; sq; sq--) {
        lo *= lo;
        hi *= hi;
    }
    return {lo, hi};
}

uint32_t subspace_dim_within(const LinSys &psi, const BlockLayout &lay,
                             const std::vector<uint32_t> &active,
                             const std::vector<uint32_t> &sub) {
    if (psi.n != lay.nvars())
        throw PreconditionError("subspace_dim_within: width mismatch");
    std::vector<uint32_t> act = sorted_unique(active);
    std::vector<uint32_t> s = sorted_unique(sub);
    if (!set_minus(s, act).empty())
        throw PreconditionError("subspace_dim_within: sub is not inside active");
    auto rref = masked_rref(psi.eqs, blocks_mask(lay, act));
    return uint32_t(rows_within(rref, blocks_mask(lay, s)).size());
}

PivotPairs find_pivots(const LinSys &psi, const BlockLayout &lay,
                       std::vector<uint32_t> active) {
    const uint32_t n = lay.nvars(), l = lay.l;
    if (psi.n != n) throw PreconditionError("find_pivots: system width does not match the layout");
    if (active.empty()) active = all_blocks(lay.m);
    std::vector<uint32_t> act = sorted_unique(active);
    if (act.size() != active.size())
        throw PreconditionError("find_pivots: duplicate active blocks");
    if (act.front() < 1 || act.back() > lay.m)
        throw PreconditionError("find_pivots: active block out of range");

    LinSys red = row_reduce(psi);
    if (is_inconsistent(red))
        throw PreconditionError("find_pivots: inconsistent system");
    F2Vec entry_mask = blocks_mask(lay, act);
    for (const Parity &e : psi.eqs)
        if (andnot_vec(e.form, entry_mask).any())
            throw PreconditionError("find_pivots: support outside the active blocks");
    uint32_t rank = uint32_t(red.eqs.size());
    if (rank < l) throw PreconditionError("find_pivots: rank below the coordinate count");
    const uint32_t r = rank - l;
    if (act.size() <= 2 * r + l)
        throw PreconditionError("find_pivots: too few active blocks for the rank");
    {
        FormSet fs(lay);
        for (const Parity &e : psi.eqs) fs.forms.push_back(e.form);
        if (!is_safe(fs).safe) throw PreconditionError("find_pivots: unsafe system");
    }

    auto sum_form = [&](const std::vector<uint32_t> &blocks, uint32_t j) {
        F2Vec f(n);
        for (uint32_t i : blocks) f.set(lay.var(i, j), true);
        return f;
    };

    uint32_t b_mask = 0;
    {
        auto rref0 = masked_rref(psi.eqs, entry_mask);
        for (uint32_t j = 1; j <= l; j++) {
            auto sol = masked_solve(rref0, sum_form(act, j), n);
            if (!sol) throw PreconditionError("find_pivots: a column sum is outside the span");
            if (sol->constant) b_mask |= uint32_t(1) << (j - 1);
        }
    }

    std::vector<Parity> rows = psi.eqs;
    std::vector<uint32_t> cur = act;
    std::vector<PivotStep> steps;
    std::vector<Parity> eqv;

    for (uint32_t rcur = r; rcur > 0; rcur--) {
        F2Vec am = blocks_mask(lay, cur);
        auto rref = masked_rref(rows, am);
        if (rref.size() != l + rcur)
            throw AuditError("find_pivots: masked rank off schedule");
        {
            FormSet ms(lay);
            for (const MRow &q : rref) ms.forms.push_back(q.mf);
            if (!is_safe(ms).safe)
                throw AuditError("find_pivots: the masked system lost safety");
        }
        std::vector<Parity> sums(l + 1, Parity(n));
        std::vector<F2Vec> sum_masked;
        for (uint32_t j = 1; j <= l; j++) {
            F2Vec sf = sum_form(cur, j);
            auto sol = masked_solve(rref, sf, n);
            if (!sol) throw AuditError("find_pivots: a column sum left the span");
            sums[j] = *sol;
            sum_masked.push_back(sf);
        }

        SubsetScan scan = scan_subsets(rref, lay, cur, rcur);
        uint32_t i1 = 0, i1p = 0, j1 = 0;
        Parity veq(n);

        if (!scan.importants.empty()) {
            const std::vector<uint32_t> &S = scan.importants.front();
            auto basis = rows_within(rref, blocks_mask(lay, S));
            int lowvar = -1;
            for (const MRow &q : basis) {
                int lv = q.mf.lowest();
                if (lv >= 0 && (lowvar < 0 || lv < lowvar)) lowvar = lv;
            }
            if (lowvar < 0) throw AuditError("find_pivots: empty important subspace");
            i1 = lay.block_of(uint32_t(lowvar));
            j1 = lay.coord_of(uint32_t(lowvar));
            std::vector<uint32_t> T;
            for (const auto &S2 : scan.importants) T = set_union2(T, S2);
            std::vector<uint32_t> outsideT = set_minus(cur, T);
            if (outsideT.empty())
                throw AuditError("find_pivots: the important union swallowed the active set");
            i1p = outsideT.front();
            F2Vec target;
            bool found = false;
            for (const MRow &q : basis)
                if (q.mf.get(uint32_t(lowvar))) {
                    target = q.mf;
                    found = true;
                    break;
                }
            if (!found) throw AuditError("find_pivots: the low variable left its own basis");
            pair_substitute(rows, lay, i1p, i1, j1);
            auto rref2 = masked_rref(rows, am);
            auto sol = masked_solve(rref2, target, n);
            if (!sol)
                throw AuditError("find_pivots: pair substitution dropped the elimination form");
            veq = *sol;
        } else {
            std::vector<F2Vec> sum_basis = reduce_forms(sum_masked);
            int vrow = -1;
            for (size_t a = 0; a < rref.size(); a++)
                if (!in_span(rref[a].mf, sum_basis)) {
                    vrow = int(a);
                    break;
                }
            if (vrow < 0)
                throw AuditError("find_pivots: no basis form outside the sum span");
            Parity vfull = rref[size_t(vrow)].full;
            F2Vec vmf = rref[size_t(vrow)].mf;
            for (uint32_t j = 1; j <= l && j1 == 0; j++) {
                F2Vec pj = and_vec(vmf, sum_masked[j - 1]);
                if (!pj.any() || pj == sum_masked[j - 1]) continue;
                j1 = j;
            }
            if (j1 == 0)
                throw AuditError("find_pivots: the chosen form projects onto no proper column");
            {
                F2Vec pj = and_vec(vmf, sum_masked[j1 - 1]);
                if (uint32_t(2 * pj.popcount()) > cur.size()) {
                    vfull.form ^= sums[j1].form;
                    vfull.constant = vfull.constant != sums[j1].constant;
                    vmf = and_vec(vfull.form, am);
                }
            }
            {
                F2Vec pj = and_vec(vmf, sum_masked[j1 - 1]);
                int lv = pj.lowest();
                if (lv < 0) throw AuditError("find_pivots: the projection emptied out");
                i1 = lay.block_of(uint32_t(lv));
            }
            std::vector<uint32_t> T{i1};
            bool grew = true;
            while (grew) {
                grew = false;
                for (const auto &S2 : scan.nears) {
                    if (set_inter(S2, T).empty()) continue;
                    if (set_minus(S2, T).empty()) continue;
                    T = set_union2(T, S2);
                    grew = true;
                }
            }
            if (T.size() >= cur.size())
                throw AuditError("find_pivots: the near-important closure swallowed the active set");
            i1p = 0;
            for (uint32_t i : set_minus(cur, T))
                if (!vmf.get(lay.var(i, j1))) {
                    i1p = i;
                    break;
                }
            if (i1p == 0)
                throw AuditError("find_pivots: no partner block avoids the elimination form");
            pair_substitute(rows, lay, i1p, i1, j1);
            veq = vfull;
        }

        uint32_t pvar = lay.var(i1, j1);
        if (!veq.form.get(pvar))
            throw AuditError("find_pivots: the elimination equation misses its pivot");
        for (Parity &row : rows)
            if (row.form.get(pvar)) {
                row.form ^= veq.form;
                row.constant = row.constant != veq.constant;
            }
        prune_rows(rows, "find_pivots");
        uint32_t gone1 = lay.var(i1, j1), gone2 = lay.var(i1p, j1);
        for (const Parity &row : rows)
            if (row.form.get(gone1) || row.form.get(gone2))
                throw AuditError("find_pivots: a removed coordinate resurfaced");
        steps.push_back({i1, i1p, j1});
        eqv.push_back(veq);
        std::vector<uint32_t> gone{std::min(i1, i1p), std::max(i1, i1p)};
        cur = set_minus(cur, gone);
    }

    F2Vec am = blocks_mask(lay, cur);
    auto rreff = masked_rref(rows, am);
    if (rreff.size() != l)
        throw AuditError("find_pivots: residual rank is not the coordinate count");
    std::vector<Parity> fsum(l + 1, Parity(n));
    for (uint32_t j = 1; j <= l; j++) {
        auto sol = masked_solve(rreff, sum_form(cur, j), n);
        if (!sol) throw AuditError("find_pivots: a residual column sum left the span");
        fsum[j] = *sol;
    }

    const uint32_t i0 = cur.front();
    std::vector<uint32_t> F(cur.begin() + 1, cur.end());

    PivotPairs out;
    out.steps = steps;
    out.free_blocks = F;
    out.base_block = i0;
    out.sum_consts = b_mask;
    for (const PivotStep &st : steps) {
        out.paired_blocks.push_back(st.i);
        out.paired_blocks.push_back(st.ip);
    }
    std::sort(out.paired_blocks.begin(), out.paired_blocks.end());

    AffRestr combined(n);
    try {
        for (uint32_t j = 1; j <= l; j++) {
            if (!fsum[j].form.get(lay.var(i0, j)))
                throw AuditError("find_pivots: the base block left its own sum");
            Parity val{fsum[j].form ^ unit_form(n, lay.var(i0, j)), fsum[j].constant};
            combined.fix(lay.var(i0, j), val);
        }
        for (size_t t = steps.size(); t > 0; t--) {
            const PivotStep &st = steps[t - 1];
            uint32_t pv = lay.var(st.i, st.j);
            Parity val{eqv[t - 1].form ^ unit_form(n, pv), eqv[t - 1].constant};
            val = substitute(val, combined);
            combined.fix(pv, val);
            combined.fix(lay.var(st.ip, st.j), Parity{val.form, !val.constant});
        }
    } catch (const std::invalid_argument &e) {
        throw flatness_error("find_pivots", e);
    }

    AffRestr rho1(n), rho2(n);
    for (uint32_t j = 1; j <= l; j++)
        rho2.fix(lay.var(i0, j), combined.fixed.at(lay.var(i0, j)));
    for (const PivotStep &st : steps) {
        rho1.fix(lay.var(st.i, st.j), combined.fixed.at(lay.var(st.i, st.j)));
        rho1.fix(lay.var(st.ip, st.j), combined.fixed.at(lay.var(st.ip, st.j)));
    }
    out.rho1 = rho1;
    out.rho2 = rho2;
    out.combined = combined;

    if (F.size() + 2 * r + 1 != act.size())
        throw AuditError("find_pivots: the free count is off the schedule");
    std::vector<uint32_t> gset;
    for (const PivotStep &st : steps) {
        gset.push_back(lay.var(st.i, st.j));
        gset.push_back(lay.var(st.ip, st.j));
    }
    std::sort(gset.begin(), gset.end());
    for (const auto &[v, val] : rho1.fixed) {
        if (!has(gset, v)) throw AuditError("find_pivots: rho1 fixes a stray position");
        for (uint32_t u : val.form.ones()) {
            if (lay.block_of(u) == i0)
                throw AuditError("find_pivots: rho1 references the base block");
            if (has(gset, u))
                throw AuditError("find_pivots: rho1 references a paired coordinate");
        }
    }
    if (rho1.fixed.size() != gset.size())
        throw AuditError("find_pivots: rho1 misses a paired coordinate");
    for (const PivotStep &st : steps) {
        Parity both{unit_form(n, lay.var(st.i, st.j)) ^ unit_form(n, lay.var(st.ip, st.j)),
                    false};
        Parity sub = substitute(both, rho1);
        if (sub.form.any() || !sub.constant)
            throw AuditError("find_pivots: a pair does not disagree");
    }
    for (uint32_t j = 1; j <= l; j++) {
        F2Vec form(n);
        for (uint32_t i : F) form.set(lay.var(i, j), true);
        uint32_t cnt = 0;
        for (const PivotStep &st : steps) {
            if (st.j == j) {
                cnt++;
                continue;
            }
            form.flip(lay.var(st.i, j));
            form.flip(lay.var(st.ip, j));
        }
        bool c = ((b_mask >> (j - 1)) & 1) != 0;
        if (cnt & 1) c = !c;
        if (!(rho2.fixed.at(lay.var(i0, j)) == Parity{form, c}))
            throw AuditError("find_pivots: the sum ledger disagrees with its closed form");
    }
    if (!implies(combined.graph_system(), psi))
        throw AuditError("find_pivots: the assembled restriction fails to carry the system");
    return out;
}

TcollRestriction affine_restriction_tcoll(const TcollResult &run,
                                          const std::vector<uint32_t> &holes, uint32_t t,
                                          const LinSys &psi, const BlockLayout &lay) {
    const uint32_t n = lay.nvars(), l = lay.l;
    const char *who = "affine_restriction_tcoll";
    if (run.fail) throw PreconditionError(std::string(who) + ": failed run");
    if (t < 2) throw PreconditionError(std::string(who) + ": collision arity below two");
    if (psi.n != n || run.eqs.n != n || run.solved.n != n)
        throw PreconditionError(std::string(who) + ": width mismatch");
    if (l < 1 || l > 20) throw PreconditionError(std::string(who) + ": unsupported block width");
    const uint32_t nstr = uint32_t(1) << l;
    std::vector<uint32_t> A = sorted_unique(holes);
    if (A.size() != holes.size() || (!A.empty() && A.back() >= nstr))
        throw PreconditionError(std::string(who) + ": bad hole set");
    LinSys red = row_reduce(psi);
    if (is_inconsistent(red))
        throw PreconditionError(std::string(who) + ": inconsistent system");
    const uint32_t r = uint32_t(red.eqs.size());
    if ((nstr - uint32_t(A.size())) + 2 * r > nstr / 2)
        throw PreconditionError(std::string(who) + ": hole deficit too large for the rank");
    if (!implies(run.eqs, psi))
        throw PreconditionError(std::string(who) + ": the path does not carry the system");

    FormSet fs(lay);
    for (const Parity &e : psi.eqs) fs.forms.push_back(e.form);
    std::vector<uint32_t> cl = closure(fs);
    std::vector<uint32_t> F = run.free_blocks;
    std::sort(F.begin(), F.end());
    std::vector<uint32_t> clF = set_inter(cl, F), clNF = set_minus(cl, F);

    std::set<uint32_t> uhat;
    for (uint32_t i : clNF)
        for (uint32_t y : block_completions(run.solved, i, lay)) uhat.insert(y);

    std::set<uint32_t> used_vals = uhat;
    F2Vec freebits(n);
    for (uint32_t i : clF) {
        uint32_t pick = nstr;
        for (uint32_t a : A)
            if (!used_vals.count(a)) {
                pick = a;
                break;
            }
        if (pick == nstr)
            throw AuditError(std::string(who) + ": allowed holes exhausted for the closure");
        used_vals.insert(pick);
        lay.set_block(freebits, i, pick);
    }
    F2Vec x = run.solved.extend(freebits);

    AffRestr rho(n);
    std::vector<uint32_t> u1;
    for (uint32_t i : cl) {
        uint32_t y = lay.get_block(x, i);
        u1.push_back(y);
        for (uint32_t j = 1; j <= l; j++)
            rho.fix_const(lay.var(i, j), (y >> (j - 1)) & 1);
    }

    LinSys psi1 = substitute(psi, rho);
    {
        std::vector<Parity> rows = psi1.eqs;
        prune_rows(rows, who);
        psi1 = LinSys(n, rows);
    }
    LinSys psi1red = row_reduce(psi1);
    if (is_inconsistent(psi1red))
        throw AuditError(std::string(who) + ": closure values violate the system");
    const uint32_t r1 = uint32_t(psi1red.eqs.size());
    FormSet fs1(lay);
    for (const Parity &e : psi1red.eqs) fs1.forms.push_back(e.form);
    SafeReport rep = is_safe(fs1);
    if (!rep.safe) throw AuditError(std::string(who) + ": the residual system is unsafe");
    if (rep.witness_cols.size() != r1)
        throw AuditError(std::string(who) + ": the safety witness misses the rank");
    std::vector<uint32_t> wcols = rep.witness_cols;
    std::sort(wcols.begin(), wcols.end());
    std::vector<uint32_t> pivots;
    for (uint32_t w : wcols) pivots.push_back(lay.block_of(w));
    if (sorted_unique(pivots).size() != pivots.size() || !set_inter(pivots, cl).empty())
        throw AuditError(std::string(who) + ": pivot blocks collide");

    std::set<uint32_t> taken(u1.begin(), u1.end());
    std::vector<std::pair<uint32_t, uint32_t>> chosen;
    for (uint32_t w : wcols) {
        uint32_t bi = lay.block_of(w), cj = lay.coord_of(w);
        bool got = false;
        for (uint32_t pat = 0; pat < (uint32_t(1) << (l - 1)) && !got; pat++) {
            uint32_t base = 0, src = 0;
            for (uint32_t j = 1; j <= l; j++) {
                if (j == cj) continue;
                if ((pat >> src) & 1) base |= uint32_t(1) << (j - 1);
                src++;
            }
            uint32_t v0 = base, v1 = base | (uint32_t(1) << (cj - 1));
            if (!has(A, v0) || !has(A, v1) || taken.count(v0) || taken.count(v1)) continue;
            taken.insert(v0);
            taken.insert(v1);
            chosen.push_back({v0, v1});
            for (uint32_t j = 1; j <= l; j++)
                if (j != cj) rho.fix_const(lay.var(bi, j), (base >> (j - 1)) & 1);
            got = true;
        }
        if (!got)
            throw AuditError(std::string(who) + ": no fresh near-constant pair available");
    }

    LinSys psi2 = substitute(psi1red, rho);
    std::vector<uint32_t> fixed_set = set_union2(cl, pivots);
    auto solved = solve_pivot_columns(psi2.eqs, wcols, fixed_set, lay, who);
    try {
        for (auto &[w, val] : solved) rho.fix(w, val);
    } catch (const std::invalid_argument &e) {
        throw flatness_error(who, e);
    }

    TcollRestriction out;
    out.rho = rho;
    out.closure_blocks = cl;
    out.pivot_blocks = pivots;
    std::sort(out.pivot_blocks.begin(), out.pivot_blocks.end());
    out.fixed_blocks = fixed_set;
    out.s = uint32_t(fixed_set.size());
    if (out.s > r)
        throw AuditError(std::string(who) + ": fixed more blocks than the rank");
    if (fixed_blocks(rho, lay) != fixed_set)
        throw AuditError(std::string(who) + ": the restriction does not fix its block set");

    std::set<uint32_t> uprime;
    std::map<uint32_t, uint32_t> load;
    for (size_t a = 0; a < cl.size(); a++) {
        auto comps = block_completions(rho, cl[a], lay);
        if (comps.size() != 1 || comps[0] != u1[a])
            throw AuditError(std::string(who) + ": a closure block drifted from its value");
        uprime.insert(u1[a]);
        load[u1[a]]++;
    }
    for (size_t a = 0; a < wcols.size(); a++) {
        auto comps = block_completions(rho, lay.block_of(wcols[a]), lay);
        for (uint32_t y : comps) {
            if (y != chosen[a].first && y != chosen[a].second)
                throw AuditError(std::string(who) + ": a pivot block left its pair");
            uprime.insert(y);
            load[y]++;
        }
    }
    out.new_holes.assign(uprime.begin(), uprime.end());
    if (out.new_holes.size() > 2 * out.s)
        throw AuditError(std::string(who) + ": too many fresh holes");
    for (uint32_t y : out.new_holes)
        if (!has(A, y))
            throw AuditError(std::string(who) + ": a fresh hole is outside the allowed set");
    for (const auto &[y, c] : load)
        if (c >= t)
            throw AuditError(std::string(who) + ": a hole is owned too many times");
    if (!implies(rho.graph_system(), psi))
        throw AuditError(std::string(who) + ": the restriction fails to carry the system");
    return out;
}

std::vector<uint32_t> find_multiset(const std::vector<uint32_t> &allowed, uint32_t z,
                                    uint32_t k, uint32_t l) {
    const char *who = "find_multiset";
    if (l < 1 || l > 20) throw PreconditionError(std::string(who) + ": unsupported width");
    const uint32_t nstr = uint32_t(1) << l;
    std::vector<uint32_t> A = sorted_unique(allowed);
    if (A.size() != allowed.size() || (!A.empty() && A.back() >= nstr))
        throw PreconditionError(std::string(who) + ": bad allowed set");
    if (z >= nstr) throw PreconditionError(std::string(who) + ": target out of range");
    if (2 * A.size() <= nstr + 2 * size_t(k))
        throw PreconditionError(std::string(who) + ": allowed set too small");

    std::set<uint32_t> doubled(A.begin(), A.begin() + k);
    uint32_t zp = 0;
    for (uint32_t y : A) zp ^= y;
    for (uint32_t y : doubled) zp ^= y;
    std::set<uint32_t> removed;
    if (zp != z) {
        uint32_t diff = z ^ zp;
        bool got = false;
        for (uint32_t y1 : A) {
            if (doubled.count(y1)) continue;
            uint32_t y2 = y1 ^ diff;
            if (y2 <= y1 || !has(A, y2) || doubled.count(y2)) continue;
            removed.insert(y1);
            doubled.insert(y2);
            got = true;
            break;
        }
        if (!got) throw AuditError(std::string(who) + ": no balancing pair available");
    }

    std::vector<uint32_t> out;
    for (uint32_t y : A) {
        if (removed.count(y)) continue;
        out.push_back(y);
        if (doubled.count(y)) out.push_back(y);
    }
    if (out.size() != A.size() + k)
        throw AuditError(std::string(who) + ": wrong multiset size");
    uint32_t zc = 0;
    for (uint32_t y : out) zc ^= y;
    if (zc != z) throw AuditError(std::string(who) + ": wrong bitwise sum");
    if (doubled.size() > size_t(k) + 1)
        throw AuditError(std::string(who) + ": too many doubled values");
    return out;
}

PermRestriction affine_restriction_perm(const PermResult &run,
                                        const std::vector<uint32_t> &multiset,
                                        const std::vector<uint32_t> &allowed,
                                        const LinSys &psi, const BlockLayout &lay) {
    const uint32_t n = lay.nvars(), l = lay.l, m = lay.m;
    const char *who = "affine_restriction_perm";
    if (run.fail) throw PreconditionError(std::string(who) + ": failed run");
    if (psi.n != n || run.eqs.n != n || run.solved.n != n || run.perm_eqs.n != n)
        throw PreconditionError(std::string(who) + ": width mismatch");
    if (l < 1 || l > 20) throw PreconditionError(std::string(who) + ": unsupported block width");
    const uint32_t nstr = uint32_t(1) << l;
    if (multiset.size() != m)
        throw PreconditionError(std::string(who) + ": the multiset does not fill the blocks");
    std::vector<uint32_t> A0 = sorted_unique(allowed);
    if (A0.size() != allowed.size() || (!A0.empty() && A0.back() >= nstr))
        throw PreconditionError(std::string(who) + ": bad allowed set");
    {
        std::map<uint32_t, uint32_t> cnt;
        for (uint32_t y : multiset) {
            if (!has(A0, y))
                throw PreconditionError(std::string(who) + ": multiset value outside the allowed set");
            if (++cnt[y] > 2)
                throw PreconditionError(std::string(who) + ": multiset multiplicity above two");
        }
    }
    uint32_t z = 0;
    for (uint32_t y : multiset) z ^= y;

    LinSys sum_eqs(n);
    for (uint32_t j = 1; j <= l; j++) {
        F2Vec f(n);
        for (uint32_t i = 1; i <= m; i++) f.set(lay.var(i, j), true);
        sum_eqs.add(Parity{f, ((z >> (j - 1)) & 1) != 0});
    }
    LinSys llf = union_sys(run.eqs, run.perm_eqs);
    if (!implies(llf, psi))
        throw PreconditionError(std::string(who) + ": the path does not carry the system");
    if (!implies(llf, sum_eqs))
        throw PreconditionError(std::string(who) + ": the path does not carry the column sums");

    LinSys psi_ext = row_reduce(union_sys(psi, sum_eqs));
    if (is_inconsistent(psi_ext))
        throw PreconditionError(std::string(who) + ": inconsistent system");
    FormSet fse(lay);
    for (const Parity &e : psi_ext.eqs) fse.forms.push_back(e.form);
    const uint32_t sd = sdim(fse);
    if (sd < l) throw AuditError(std::string(who) + ": safe dimension below the coordinate count");
    const uint32_t r = sd - l;
    std::vector<uint32_t> F = run.free_blocks;
    std::sort(F.begin(), F.end());
    if (nstr / 2 + 2 * r > A0.size())
        throw PreconditionError(std::string(who) + ": allowed set too small for the rank");
    if (F.size() <= r)
        throw PreconditionError(std::string(who) + ": too few free blocks for the rank");
    if (m <= 2 * r + l)
        throw PreconditionError(std::string(who) + ": too few blocks for the rank");

    std::vector<uint32_t> cl = closure(fse);
    if (cl.size() > r)
        throw AuditError(std::string(who) + ": the closure outgrew the rank");
    std::vector<uint32_t> clF = set_inter(cl, F), clNF = set_minus(cl, F);
    std::set<uint32_t> uhat;
    for (uint32_t i : clNF)
        for (uint32_t y : block_completions(run.solved, i, lay)) uhat.insert(y);

    std::set<uint32_t> used_vals = uhat;
    F2Vec freebits(n);
    uint32_t clf_xor = 0;
    for (uint32_t i : clF) {
        uint32_t pick = nstr;
        for (uint32_t a : A0)
            if (!used_vals.count(a)) {
                pick = a;
                break;
            }
        if (pick == nstr)
            throw AuditError(std::string(who) + ": allowed values exhausted for the closure");
        used_vals.insert(pick);
        clf_xor ^= pick;
        lay.set_block(freebits, i, pick);
    }
    std::vector<uint32_t> FnotCl = set_minus(F, cl);
    if (FnotCl.empty())
        throw AuditError(std::string(who) + ": no free block left for the sum adjuster");
    uint32_t avail_xor = 0;
    for (const ColoredHole &h : run.avail) avail_xor ^= h.first;
    lay.set_block(freebits, FnotCl.front(), avail_xor ^ clf_xor);
    F2Vec x = run.solved.extend(freebits);
    if (!run.eqs.sat(x) || !run.perm_eqs.sat(x))
        throw AuditError(std::string(who) + ": the assembled point misses the path equations");

    AffRestr rho(n);
    std::vector<uint32_t> u1;
    for (uint32_t i : cl) {
        uint32_t y = lay.get_block(x, i);
        u1.push_back(y);
        for (uint32_t j = 1; j <= l; j++)
            rho.fix_const(lay.var(i, j), (y >> (j - 1)) & 1);
    }
    if (sorted_unique(u1).size() != u1.size())
        throw AuditError(std::string(who) + ": closure blocks share a value");

    LinSys psi1 = substitute(psi_ext, rho);
    {
        std::vector<Parity> rows = psi1.eqs;
        prune_rows(rows, who);
        psi1 = LinSys(n, rows);
    }
    std::vector<uint32_t> active = set_minus(all_blocks(m), cl);
    LinSys p1red = row_reduce(psi1);
    if (is_inconsistent(p1red))
        throw AuditError(std::string(who) + ": closure values break the system");
    const uint32_t rank1 = uint32_t(p1red.eqs.size());
    if (rank1 < l)
        throw AuditError(std::string(who) + ": the residual rank fell below the coordinate count");
    const uint32_t r1 = rank1 - l;
    if (active.size() <= 2 * r1 + l)
        throw AuditError(std::string(who) + ": the residual active set is too small");

    PivotPairs pp;
    try {
        pp = find_pivots(psi1, lay, active);
    } catch (const PreconditionError &e) {
        throw AuditError(std::string(who) + ": the residual system was rejected (" + e.what() + ")");
    }
    uint32_t u1_xor = 0;
    for (uint32_t y : u1) u1_xor ^= y;
    for (uint32_t j = 1; j <= l; j++) {
        bool want = (((z ^ u1_xor) >> (j - 1)) & 1) != 0;
        bool got = ((pp.sum_consts >> (j - 1)) & 1) != 0;
        if (want != got)
            throw AuditError(std::string(who) + ": the sum ledger constants drifted");
    }

    std::set<uint32_t> taken(u1.begin(), u1.end());
    std::vector<std::pair<uint32_t, uint32_t>> pair_vals;
    for (const PivotStep &st : pp.steps) {
        uint32_t flip = uint32_t(1) << (st.j - 1);
        uint32_t pick = nstr;
        for (uint32_t y = 0; y < nstr; y++) {
            if (y & flip) continue;
            uint32_t y2 = y | flip;
            if (!has(A0, y) || !has(A0, y2) || taken.count(y) || taken.count(y2)) continue;
            pick = y;
            break;
        }
        if (pick == nstr)
            throw AuditError(std::string(who) + ": no fresh flip pair available");
        taken.insert(pick);
        taken.insert(pick | flip);
        pair_vals.push_back({pick, pick | flip});
        for (uint32_t j = 1; j <= l; j++) {
            if (j == st.j) continue;
            bool bit = ((pick >> (j - 1)) & 1) != 0;
            rho.fix_const(lay.var(st.i, j), bit);
            rho.fix_const(lay.var(st.ip, j), bit);
        }
    }
    try {
        for (const auto &[v, val] : pp.rho1.fixed) rho.fix(v, substitute(val, rho));
    } catch (const std::invalid_argument &e) {
        throw flatness_error(who, e);
    }

    PermRestriction out;
    out.rho = rho;
    out.closure_blocks = cl;
    out.steps = pp.steps;
    out.hat_free = pp.free_blocks;
    out.hat_free.push_back(pp.base_block);
    std::sort(out.hat_free.begin(), out.hat_free.end());
    out.s = uint32_t(cl.size()) + 2 * uint32_t(pp.steps.size());
    for (uint32_t j = 1; j <= l; j++) {
        uint32_t cnt = 0;
        for (const PivotStep &st : pp.steps)
            if (st.j == j) cnt++;
        bool b = ((pp.sum_consts >> (j - 1)) & 1) != 0;
        if (cnt & 1) b = !b;
        if (b) out.b |= uint32_t(1) << (j - 1);
    }
    out.hat_eqs = LinSys(n);
    for (uint32_t j = 1; j <= l; j++) {
        F2Vec f(n);
        for (uint32_t i : out.hat_free) f.set(lay.var(i, j), true);
        out.hat_eqs.add(Parity{f, ((out.b >> (j - 1)) & 1) != 0});
    }
    out.used = u1;
    for (const auto &[a, b2] : pair_vals) {
        out.used.push_back(a);
        out.used.push_back(b2);
    }
    std::sort(out.used.begin(), out.used.end());
    if (out.used.size() != out.s || sorted_unique(out.used).size() != out.used.size())
        throw AuditError(std::string(who) + ": the owned values miss the fixed count");
    if (out.s > 2 * r)
        throw AuditError(std::string(who) + ": fixed more blocks than twice the rank");
    for (uint32_t y : out.used)
        if (!has(A0, y))
            throw AuditError(std::string(who) + ": an owned value is outside the allowed set");

    std::vector<uint32_t> fixed_expected = cl;
    for (const PivotStep &st : pp.steps) {
        fixed_expected.push_back(st.i);
        fixed_expected.push_back(st.ip);
    }
    std::sort(fixed_expected.begin(), fixed_expected.end());
    if (fixed_blocks(rho, lay) != fixed_expected)
        throw AuditError(std::string(who) + ": the restriction does not fix its block set");
    if (!implies(union_sys(rho.graph_system(), out.hat_eqs), psi_ext))
        throw AuditError(std::string(who) + ": the restriction fails to carry the system");
    uint32_t u_xor = 0;
    for (uint32_t y : out.used) u_xor ^= y;
    if (out.b != (z ^ u_xor))
        throw AuditError(std::string(who) + ": the surviving sum misses the owned values");
    {
        F2Vec sample(n);
        uint32_t fill_xor = 0;
        for (size_t a = 1; a < out.hat_free.size(); a++) {
            lay.set_block(sample, out.hat_free[a], 0);
        }
        lay.set_block(sample, out.hat_free.front(), out.b ^ fill_xor);
        F2Vec full = rho.extend(sample);
        std::set<uint32_t> seen;
        for (uint32_t i : fixed_expected) {
            uint32_t y = lay.get_block(full, i);
            if (!has(out.used, y))
                throw AuditError(std::string(who) + ": a fixed block left the owned values");
            if (!seen.insert(y).second)
                throw AuditError(std::string(who) + ": two fixed blocks collided");
        }
    }
    return out;
}

LiftRestriction affine_restriction_lift(const PartialVals &rho, const LiftResult &run,
                                        const LinSys &phi, const HardnessFamily &family,
                                        const Gadget &g) {
    const char *who = "affine_restriction_lift";
    BlockLayout llay(family.n, g.arity);
    const uint32_t n = llay.nvars();
    if (run.fail) throw PreconditionError(std::string(who) + ": failed run");
    if (phi.n != n || run.eqs.n != n || run.solved.n != n)
        throw PreconditionError(std::string(who) + ": width mismatch");
    if (g.out_bits != family.l)
        throw PreconditionError(std::string(who) + ": gadget output does not match the family");
    if (rho.size() != family.n)
        throw PreconditionError(std::string(who) + ": base restriction length mismatch");
    if (!family.member(rho))
        throw PreconditionError(std::string(who) + ": base restriction outside the family");

    FormSet fse(llay);
    for (const Parity &e : phi.eqs) fse.forms.push_back(e.form);
    const uint32_t r = sdim(fse);
    if (count_fixed(rho) + r > family.p)
        throw PreconditionError(std::string(who) + ": no room below the family depth");
    if (r > family.q)
        throw PreconditionError(std::string(who) + ": rank above the family budget");
    if (!implies(run.eqs, phi))
        throw PreconditionError(std::string(who) + ": the path does not carry the system");
    for (const Parity &e : phi.eqs)
        for (uint32_t i : support(e.form, llay))
            if (rho[i - 1])
                throw PreconditionError(std::string(who) +
                                        ": the system touches a block the base restriction fixed");

    std::vector<uint32_t> cl = closure(fse);
    std::vector<uint32_t> F = run.free_blocks;
    std::sort(F.begin(), F.end());
    std::vector<uint32_t> I1 = set_inter(cl, F), clNF = set_minus(cl, F);
    for (uint32_t i : clNF)
        if (!run.sigma[i - 1])
            throw AuditError(std::string(who) + ": a run-fixed closure block was never revealed");

    FormSet outside = remove_blocks(fse, cl);
    const uint32_t d = dim_of(outside.forms);
    SafeReport rep = is_safe(outside);
    if (!rep.safe)
        throw AuditError(std::string(who) + ": the system stays unsafe beyond its closure");
    if (rep.witness_cols.size() != d)
        throw AuditError(std::string(who) + ": the safety witness misses the dimension");
    std::vector<uint32_t> wcols = rep.witness_cols;
    std::sort(wcols.begin(), wcols.end());
    std::vector<uint32_t> I2;
    for (uint32_t w : wcols) I2.push_back(llay.block_of(w));
    if (sorted_unique(I2).size() != I2.size() || !set_inter(I2, cl).empty())
        throw AuditError(std::string(who) + ": pivot blocks collide");
    std::sort(I2.begin(), I2.end());

    std::vector<uint32_t> IT = set_union2(I1, I2);
    const uint32_t vbits = family.l;
    if (uint64_t(vbits) * IT.size() > kDefaultEnumCap)
        throw PreconditionError(std::string(who) + ": hole enumeration over the cap");
    const uint32_t vrange = uint32_t(1) << vbits;

    PartialVals base_fixed = rho;
    for (uint32_t i : clNF) {
        if (base_fixed[i - 1] && *base_fixed[i - 1] != *run.sigma[i - 1])
            throw AuditError(std::string(who) + ": revealed values disagree with the base restriction");
        base_fixed[i - 1] = run.sigma[i - 1];
    }
    std::vector<uint32_t> tuple(IT.size(), 0);
    bool got = false;
    for (;;) {
        PartialVals cand = base_fixed;
        bool clash = false;
        for (size_t a = 0; a < IT.size() && !clash; a++) {
            uint32_t i = IT[a];
            if (cand[i - 1] && *cand[i - 1] != tuple[a]) clash = true;
            cand[i - 1] = tuple[a];
        }
        if (!clash && family.member(cand)) {
            got = true;
            break;
        }
        size_t a = IT.size();
        while (a > 0 && tuple[a - 1] == vrange - 1) tuple[--a] = 0;
        if (a == 0) break;
        tuple[a - 1]++;
    }
    if (!got)
        throw AuditError(std::string(who) + ": no certificate-free completion below the cap");
    std::map<uint32_t, uint32_t> hat; // block -> base value
    for (size_t a = 0; a < IT.size(); a++) hat[IT[a]] = tuple[a];

    F2Vec freebits(n);
    for (uint32_t i : I1) {
        uint32_t want = hat.at(i), pre = g.inputs();
        for (uint32_t w = 0; w < g.inputs(); w++)
            if (g.eval(w) == want) {
                pre = w;
                break;
            }
        if (pre == g.inputs())
            throw AuditError(std::string(who) + ": a base value is outside the gadget range");
        llay.set_block(freebits, i, pre);
    }
    F2Vec x = run.solved.extend(freebits);
    for (uint32_t i : clNF)
        if (g.eval(llay.get_block(x, i)) != *run.sigma[i - 1])
            throw AuditError(std::string(who) + ": a run-fixed closure block decodes off its value");

    AffRestr tau(n);
    for (uint32_t i : cl) {
        uint32_t w = llay.get_block(x, i);
        for (uint32_t j = 1; j <= g.arity; j++)
            tau.fix_const(llay.var(i, j), (w >> (j - 1)) & 1);
    }
    for (uint32_t w : wcols) {
        uint32_t bi = llay.block_of(w), cj = llay.coord_of(w);
        uint32_t y = hat.at(bi);
        uint32_t st = g.stifle[y * g.arity + (cj - 1)];
        if ((st >> (cj - 1)) & 1)
            throw AuditError(std::string(who) + ": a stifling witness keeps its own bit");
        if (g.eval(st) != y || g.eval(st | (uint32_t(1) << (cj - 1))) != y)
            throw AuditError(std::string(who) + ": a stifling witness fails to stifle");
        for (uint32_t j = 1; j <= g.arity; j++)
            if (j != cj) tau.fix_const(llay.var(bi, j), (st >> (j - 1)) & 1);
    }

    LinSys phi2 = substitute(phi, tau);
    std::vector<uint32_t> fixed_set = set_union2(cl, I2);
    auto solved = solve_pivot_columns(phi2.eqs, wcols, fixed_set, llay, who);
    try {
        for (auto &[w, val] : solved) tau.fix(w, val);
    } catch (const std::invalid_argument &e) {
        throw flatness_error(who, e);
    }

    LiftRestriction out;
    out.tau = tau;
    out.fixed_blocks = fixed_set;
    out.s = uint32_t(fixed_set.size());
    if (out.s != r)
        throw AuditError(std::string(who) + ": the fixed block count misses the safe dimension");
    if (fixed_blocks(tau, llay) != fixed_set)
        throw AuditError(std::string(who) + ": the restriction does not fix its block set");
    out.rho_prime = all_free(family.n);
    for (uint32_t i : clNF) out.rho_prime[i - 1] = run.sigma[i - 1];
    for (const auto &[i, y] : hat) out.rho_prime[i - 1] = y;
    if (!implies(tau.graph_system(), phi))
        throw AuditError(std::string(who) + ": the restriction fails to carry the system");
    if (!family.member(merge_partial(rho, out.rho_prime)))
        throw AuditError(std::string(who) + ": the extended base restriction left the family");
    for (uint32_t i : fixed_set) {
        auto comps = block_completions(tau, i, llay);
        if (!has(I2, i) && comps.size() != 1)
            throw AuditError(std::string(who) + ": a closure block kept a free bit");
        for (uint32_t w : comps)
            if (g.eval(w) != *out.rho_prime[i - 1])
                throw AuditError(std::string(who) + ": a completion decodes off its base value");
    }
    return out;
}

namespace {

HardnessFamily pigeon_family(const std::string &name, uint32_t nholes, uint32_t k,
                             uint32_t d, uint32_t nblocks, uint32_t vbits, bool onehot) {
    const char *who = "pigeon family";
    if (nholes < 2) throw PreconditionError(std::string(who) + ": too few holes");
    uint32_t p = (15 * nholes) / 32;
    if (d < 1 || 4 * d > nholes)
        throw PreconditionError(std::string(who) + ": depth beyond a quarter of the holes");
    if (k > nholes - p)
        throw PreconditionError(std::string(who) + ": some member would exhaust the holes");

    HardnessFamily fam;
    fam.name = name;
    fam.n = nblocks;
    fam.l = vbits;
    fam.p = p;
    fam.q = d;
    fam.epsilon =
        rat_exp_bounds(rat(8 * long(d) * long(d) * long(k), long(nholes) * long(nholes)))
            .first;

    auto hole_of = [onehot, nholes](uint32_t v) -> std::optional<uint32_t> {
        if (!onehot) return v < nholes ? std::optional<uint32_t>(v) : std::nullopt;
        if (v == 0 || (v & (v - 1)) != 0) return std::nullopt;
        uint32_t h = 0;
        while (!((v >> h) & 1)) h++;
        return h < nholes ? std::optional<uint32_t>(h) : std::nullopt;
    };

    fam.member = [nblocks, hole_of](const PartialVals &rho) {
        if (rho.size() != nblocks) return false;
        std::set<uint32_t> seen;
        for (const auto &v : rho) {
            if (!v) continue;
            auto h = hole_of(*v);
            if (!h || !seen.insert(*h).second) return false;
        }
        return true;
    };
    fam.sample = [nblocks, nholes, k, p, onehot, hole_of,
                  member = fam.member](const PartialVals &rho, RandomTape &tape) {
        if (!member(rho))
            throw PreconditionError("pigeon family: sampling outside the family");
        if (count_fixed(rho) > p)
            throw PreconditionError("pigeon family: sampling below a too-deep member");
        std::vector<uint32_t> cnt(nholes, 0);
        std::vector<char> used(nholes, 0);
        for (const auto &v : rho)
            if (v) used[*hole_of(*v)] = 1;
        uint32_t doubles = 0;
        for (uint32_t h = 0; h < nholes; h++) {
            if (used[h]) continue;
            cnt[h] = 1;
            if (doubles < k) {
                cnt[h] = 2;
                doubles++;
            }
        }
        uint32_t remaining = 0;
        for (uint32_t h = 0; h < nholes; h++) remaining += cnt[h];
        std::vector<uint32_t> z(nblocks, 0);
        for (uint32_t i = 1; i <= nblocks; i++) {
            if (rho[i - 1]) {
                z[i - 1] = *rho[i - 1];
                continue;
            }
            std::vector<uint32_t> vals;
            std::vector<Rat> weights;
            for (uint32_t h = 0; h < nholes; h++)
                if (cnt[h]) {
                    vals.push_back(h);
                    weights.push_back(rat(long(cnt[h]), long(remaining)));
                }
            uint32_t pick = tape.choose("hole", weights);
            uint32_t h = vals[pick];
            cnt[h]--;
            remaining--;
            z[i - 1] = onehot ? (uint32_t(1) << h) : h;
        }
        return z;
    };
    return fam;
}

} // namespace

HardnessFamily bphp_family(uint32_t l, uint32_t k, uint32_t d) {
    if (l < 1 || l > 20) throw PreconditionError("bphp_family: unsupported width");
    uint32_t nholes = uint32_t(1) << l;
    std::ostringstream name;
    name << "bphp(l=" << l << ",k=" << k << ",d=" << d << ")";
    return pigeon_family(name.str(), nholes, k, d, nholes + k, l, false);
}

HardnessFamily fphp_family(uint32_t n, uint32_t k, uint32_t d) {
    if (n < 2 || n > 20) throw PreconditionError("fphp_family: unsupported hole count");
    std::ostringstream name;
    name << "fphp(n=" << n << ",k=" << k << ",d=" << d << ")";
    return pigeon_family(name.str(), n, k, d, n + k, n, true);
}

namespace {

uint32_t ceil_log2(uint32_t n) {
    uint32_t b = 0;
    while ((uint32_t(1) << b) < n) b++;
    return b;
}

struct TreeBuilder {
    Pdt t;

    int add_internal(Parity q) {
        Pdt::Node nd;
        nd.query = std::move(q);
        t.nodes.push_back(std::move(nd));
        return int(t.nodes.size()) - 1;
    }
    int add_leaf(Output o) {
        Pdt::Node nd;
        nd.leaf = true;
        nd.label = std::move(o);
        t.nodes.push_back(std::move(nd));
        return int(t.nodes.size()) - 1;
    }
    int add_abort() {
        Pdt::Node nd;
        nd.leaf = true;
        nd.abort = true;
        t.nodes.push_back(std::move(nd));
        return int(t.nodes.size()) - 1;
    }
};

uint32_t clause_index(const std::map<std::vector<Lit>, uint32_t> &index,
                      std::vector<Lit> lits, const char *who) {
    std::sort(lits.begin(), lits.end());
    auto it = index.find(lits);
    if (it == index.end())
        throw AuditError(std::string(who) + ": an expected clause is missing");
    return it->second;
}

} // namespace

Pdt fphp_pdt(uint32_t n, uint32_t m) {
    const char *who = "fphp_pdt";
    if (n < 2 || n > 6) throw PreconditionError(std::string(who) + ": unsupported hole count");
    if (m < n + 1 || m > n + 2)
        throw PreconditionError(std::string(who) + ": pigeon count out of range");
    double leaves = 1;
    for (uint32_t i = 0; i < m; i++) leaves *= double(n);
    if (leaves > double(1 << 20))
        throw PreconditionError(std::string(who) + ": tree too large");

    BlockLayout lay(m, n);
    const uint32_t nv = lay.nvars();
    CnfFormula cnf = gen_fphp(n, m);
    std::map<std::vector<Lit>, uint32_t> index;
    for (size_t c = 0; c < cnf.clauses.size(); c++) {
        std::vector<Lit> lits = cnf.clauses[c];
        std::sort(lits.begin(), lits.end());
        index[lits] = uint32_t(c) + 1;
    }
    auto lit = [&](uint32_t i, uint32_t j, bool pos) {
        Lit v = Lit(lay.var(i, j) + 1);
        return pos ? v : -v;
    };

    TreeBuilder tb;
    tb.t.nvars = nv;

    std::function<int(uint32_t, uint32_t, uint32_t)> rec_row =
        [&](uint32_t i, uint32_t j, uint32_t bits) -> int {
        if (j > n) {
            std::vector<uint32_t> ones;
            for (uint32_t h = 1; h <= n; h++)
                if ((bits >> (h - 1)) & 1) ones.push_back(h);
            if (ones.empty()) {
                std::vector<Lit> c;
                for (uint32_t h = 1; h <= n; h++) c.push_back(lit(i, h, true));
                return tb.add_leaf({clause_index(index, c, who)});
            }
            if (ones.size() == 1) return tb.add_abort();
            return tb.add_leaf(
                {clause_index(index, {lit(i, ones[0], false), lit(i, ones[1], false)}, who)});
        }
        F2Vec f(nv);
        f.set(lay.var(i, j), true);
        int v = tb.add_internal(Parity{f, false});
        int c0 = rec_row(i, j + 1, bits);
        int c1 = rec_row(i, j + 1, bits | (uint32_t(1) << (j - 1)));
        tb.t.nodes[size_t(v)].child[0] = c0;
        tb.t.nodes[size_t(v)].child[1] = c1;
        return v;
    };

    std::function<int(uint32_t, uint32_t, uint32_t, std::vector<uint32_t>)> rec_search =
        [&](uint32_t i, uint32_t lo, uint32_t hi, std::vector<uint32_t> hole) -> int {
        if (hi - lo == 1) {
            hole[i] = lo;
            if (i < m) return rec_search(i + 1, 0, n, std::move(hole));
            for (uint32_t a = 1; a <= m; a++)
                for (uint32_t b = a + 1; b <= m; b++)
                    if (hole[a] == hole[b])
                        return tb.add_leaf({clause_index(
                            index, {lit(a, hole[a] + 1, false), lit(b, hole[b] + 1, false)},
                            who)});
            throw AuditError(std::string(who) + ": no colliding pair at a full leaf");
        }
        uint32_t mid = lo + (hi - lo) / 2;
        F2Vec f(nv);
        for (uint32_t h = lo; h < mid; h++) f.set(lay.var(i, h + 1), true);
        int v = tb.add_internal(Parity{f, false});
        int c1 = rec_search(i, lo, mid, hole);
        int c0 = rec_search(i, mid, hi, std::move(hole));
        tb.t.nodes[size_t(v)].child[0] = c0;
        tb.t.nodes[size_t(v)].child[1] = c1;
        return v;
    };

    std::function<int(uint32_t, uint32_t)> rec_sums = [&](uint32_t i,
                                                          uint32_t ones_mask) -> int {
        if (i <= m) {
            F2Vec f(nv);
            for (uint32_t j = 1; j <= n; j++) f.set(lay.var(i, j), true);
            int v = tb.add_internal(Parity{f, false});
            int c0 = rec_sums(i + 1, ones_mask);
            int c1 = rec_sums(i + 1, ones_mask | (uint32_t(1) << (i - 1)));
            tb.t.nodes[size_t(v)].child[0] = c0;
            tb.t.nodes[size_t(v)].child[1] = c1;
            return v;
        }
        if (ones_mask != (uint32_t(1) << m) - 1) {
            uint32_t first = 1;
            while ((ones_mask >> (first - 1)) & 1) first++;
            return rec_row(first, 1, 0);
        }
        return rec_search(1, 0, n, std::vector<uint32_t>(m + 1, 0));
    };

    rec_sums(1, 0);
    uint32_t want = m + std::max(n, m * ceil_log2(n));
    if (tb.t.depth() != want)
        throw AuditError(std::string(who) + ": depth misses its closed form");
    return tb.t;
}

Pdt lift_pdt(const Pdt &base, const CnfFormula &base_cnf) {
    const char *who = "lift_pdt";
    const uint32_t m = base_cnf.lay.m, l = base_cnf.lay.l;
    if (base.nvars != base_cnf.nvars())
        throw PreconditionError(std::string(who) + ": tree and formula widths disagree");
    {
        SearchProblem fc = false_clause_search(base_cnf);
        BlockVals counter;
        if (!pdt_solves(base, fc, &counter))
            throw PreconditionError(std::string(who) + ": the base tree fails at input " +
                                    join_u32(counter));
    }
    CnfFormula lifted = lift_block_indexing(base_cnf);
    BlockLayout llay = lifted.lay;
    const uint32_t nv = llay.nvars();

    std::vector<std::vector<uint32_t>> cblocks(base_cnf.clauses.size());
    std::vector<uint32_t> offset(base_cnf.clauses.size(), 0);
    uint32_t acc = 0;
    for (size_t c = 0; c < base_cnf.clauses.size(); c++) {
        std::vector<uint32_t> blocks;
        for (Lit t : base_cnf.clauses[c]) {
            uint32_t b = base_cnf.lay.block_of(uint32_t(t > 0 ? t : -t) - 1);
            if (std::find(blocks.begin(), blocks.end(), b) == blocks.end())
                blocks.push_back(b);
        }
        std::sort(blocks.begin(), blocks.end());
        cblocks[c] = blocks;
        offset[c] = acc;
        acc += uint32_t(1) << blocks.size();
    }
    if (acc != lifted.clauses.size())
        throw AuditError(std::string(who) + ": the lifted clause count went off");

    TreeBuilder tb;
    tb.t.nvars = nv;
    auto sel = [&](uint32_t i) { return llay.var(i, 1); };
    auto xvar = [&](uint32_t i, uint32_t j, uint32_t side) {
        return llay.var(i, 1 + side * l + j);
    };

    std::function<int(int, const std::vector<uint32_t> &)> clone =
        [&](int v, const std::vector<uint32_t> &svals) -> int {
        const Pdt::Node &nd = base.nodes[size_t(v)];
        if (nd.leaf) {
            if (nd.abort) return tb.add_abort();
            if (nd.label.size() != 1 || nd.label[0] < 1 ||
                nd.label[0] > base_cnf.clauses.size())
                throw PreconditionError(std::string(who) + ": a base leaf is not a clause index");
            uint32_t ci = nd.label[0] - 1;
            const std::vector<uint32_t> &blocks = cblocks[ci];
            uint32_t eps = 0;
            for (size_t a = 0; a < blocks.size(); a++)
                if (svals[blocks[a] - 1]) eps |= uint32_t(1) << a;
            uint32_t idx = offset[ci] + eps;
            std::vector<Lit> want;
            for (size_t a = 0; a < blocks.size(); a++) {
                uint32_t i = blocks[a];
                uint32_t side = (eps >> a) & 1;
                Lit s = Lit(sel(i) + 1);
                want.push_back(side ? -s : s);
                for (Lit t : base_cnf.clauses[ci]) {
                    uint32_t v0 = uint32_t(t > 0 ? t : -t) - 1;
                    if (base_cnf.lay.block_of(v0) != i) continue;
                    uint32_t j = base_cnf.lay.coord_of(v0);
                    Lit xl = Lit(xvar(i, j, side) + 1);
                    want.push_back(t > 0 ? xl : -xl);
                }
            }
            if (lifted.clauses[idx] != want)
                throw AuditError(std::string(who) + ": the lifted clause mismatched its branch");
            return tb.add_leaf({idx + 1});
        }
        F2Vec f(nv);
        for (uint32_t v0 : nd.query.form.ones()) {
            uint32_t i = base_cnf.lay.block_of(v0);
            uint32_t j = base_cnf.lay.coord_of(v0);
            f.flip(xvar(i, j, svals[i - 1]));
        }
        int w = tb.add_internal(Parity{f, nd.query.constant});
        int c0 = clone(nd.child[0], svals);
        int c1 = clone(nd.child[1], svals);
        tb.t.nodes[size_t(w)].child[0] = c0;
        tb.t.nodes[size_t(w)].child[1] = c1;
        return w;
    };

    std::function<int(uint32_t, std::vector<uint32_t>)> rec_sel =
        [&](uint32_t i, std::vector<uint32_t> svals) -> int {
        if (i > m) return clone(0, svals);
        F2Vec f(nv);
        f.set(sel(i), true);
        int v = tb.add_internal(Parity{f, false});
        svals[i - 1] = 0;
        int c0 = rec_sel(i + 1, svals);
        svals[i - 1] = 1;
        int c1 = rec_sel(i + 1, std::move(svals));
        tb.t.nodes[size_t(v)].child[0] = c0;
        tb.t.nodes[size_t(v)].child[1] = c1;
        return v;
    };

    rec_sel(1, std::vector<uint32_t>(m, 0));
    if (tb.t.depth() != base.depth() + m)
        throw AuditError(std::string(who) + ": the lift changed the depth budget");
    return tb.t;
}

} // namespace wb
