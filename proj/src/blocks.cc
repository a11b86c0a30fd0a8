#include "wb/blocks.hh"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <optional>
#include <sstream>

namespace wb {

std::vector<uint32_t> support(const F2Vec &form, const BlockLayout &lay) {
    std::vector<uint32_t> out;
    for (uint32_t i = 1; i <= lay.m; i++) {
        bool hit = false;
        for (uint32_t j = 1; j <= lay.l && !hit; j++) hit = form.get(lay.var(i, j));
        if (hit) out.push_back(i);
    }
    return out;
}

std::vector<uint32_t> support(const Parity &p, const BlockLayout &lay) {
    return support(p.form, lay);
}

F2Vec proj(const Parity &p, uint32_t h, const BlockLayout &lay) {
    F2Vec out(p.form.n);
    for (uint32_t i = 1; i <= lay.m; i++) {
        uint32_t v = lay.var(i, h);
        if (p.form.get(v)) out.set(v, true);
    }
    return out;
}

uint32_t proj_size(const Parity &p, uint32_t h, const BlockLayout &lay) {
    return uint32_t(proj(p, h, lay).popcount());
}

F2Vec zero_blocks(const F2Vec &form, const BlockLayout &lay,
                  const std::vector<uint32_t> &I) {
    F2Vec out = form;
    for (uint32_t i : I)
        for (uint32_t j = 1; j <= lay.l; j++) out.set(lay.var(i, j), false);
    return out;
}

FormSet remove_blocks(const FormSet &v, const std::vector<uint32_t> &I) {
    FormSet out(v.lay);
    for (const F2Vec &f : v.forms) out.forms.push_back(zero_blocks(f, v.lay, I));
    return out;
}

std::vector<F2Vec> reduce_forms(const std::vector<F2Vec> &forms) {
    std::vector<F2Vec> rows;
    for (const F2Vec &f0 : forms) {
        F2Vec f = f0;
        for (const F2Vec &r : rows)
            if (f.get(uint32_t(r.lowest()))) f ^= r;
        if (f.is_zero()) continue;
        for (F2Vec &r : rows)
            if (r.get(uint32_t(f.lowest()))) r ^= f;
        rows.push_back(std::move(f));
    }
    std::sort(rows.begin(), rows.end(),
              [](const F2Vec &a, const F2Vec &b) { return a.lowest() < b.lowest(); });
    return rows;
}

uint32_t dim_of(const std::vector<F2Vec> &forms) {
    return uint32_t(reduce_forms(forms).size());
}

bool in_span(const F2Vec &form, const std::vector<F2Vec> &reduced_basis) {
    F2Vec f = form;
    for (const F2Vec &r : reduced_basis)
        if (f.get(uint32_t(r.lowest()))) f ^= r;
    return f.is_zero();
}

std::vector<uint32_t> max_block_distinct_independent_cols(
    const std::vector<F2Vec> &forms, const BlockLayout &lay) {
    std::vector<F2Vec> basis = reduce_forms(forms);
    uint32_t k = uint32_t(basis.size());
    uint32_t N = lay.nvars();

    // column c as a k-bit vector over the basis rows
    auto col_vec = [&](uint32_t c) {
        F2Vec v(k);
        for (uint32_t r = 0; r < k; r++)
            if (basis[r].get(c)) v.set(r, true);
        return v;
    };
    std::vector<F2Vec> cols;
    cols.reserve(N);
    for (uint32_t c = 0; c < N; c++) cols.push_back(col_vec(c));

    std::vector<bool> chosen(N, false);
    auto rank_with = [&](const std::vector<uint32_t> &cs) {
        std::vector<F2Vec> rows;
        for (uint32_t c : cs) {
            F2Vec f = cols[c];
            for (const F2Vec &r : rows)
                if (f.get(uint32_t(r.lowest()))) f ^= r;
            if (!f.is_zero()) rows.push_back(std::move(f));
        }
        return uint32_t(rows.size());
    };
    auto chosen_list = [&]() {
        std::vector<uint32_t> cs;
        for (uint32_t c = 0; c < N; c++)
            if (chosen[c]) cs.push_back(c);
        return cs;
    };

    while (true) {
        std::vector<uint32_t> X = chosen_list();
        std::vector<bool> block_used(lay.m + 1, false);
        for (uint32_t c : X) block_used[lay.block_of(c)] = true;

        // shortest augmenting path in the exchange graph: sources are columns
        // addable to the linear side, sinks are columns whose block is free
        std::vector<int> parent(N, -2);
        std::deque<uint32_t> q;
        auto lin_addable = [&](uint32_t y) {
            std::vector<uint32_t> cs = X;
            cs.push_back(y);
            return rank_with(cs) == X.size() + 1;
        };
        for (uint32_t y = 0; y < N; y++)
            if (!chosen[y] && lin_addable(y)) {
                parent[y] = -1;
                q.push_back(y);
            }
        int found = -1;
        while (!q.empty() && found < 0) {
            uint32_t u = q.front();
            q.pop_front();
            if (!chosen[u]) {
                if (!block_used[lay.block_of(u)]) {
                    found = int(u);
                    break;
                }
                // u not chosen: edges u -> x for x in X with X - x + u independent
                // in the partition matroid, i.e. x shares u's block
                for (uint32_t x : X)
                    if (lay.block_of(x) == lay.block_of(u) && parent[x] == -2) {
                        parent[x] = int(u);
                        q.push_back(x);
                    }
            } else {
                // u chosen: edges u -> y for y not in X with X - u + y independent
                // in the linear matroid
                for (uint32_t y = 0; y < N; y++) {
                    if (chosen[y] || parent[y] != -2) continue;
                    std::vector<uint32_t> cs;
                    for (uint32_t c : X)
                        if (c != u) cs.push_back(c);
                    cs.push_back(y);
                    if (rank_with(cs) == X.size()) {
                        parent[y] = int(u);
                        q.push_back(y);
                    }
                }
            }
        }
        if (found < 0) break;
        for (int c = found; c != -1; c = parent[c]) chosen[uint32_t(c)] = !chosen[uint32_t(c)];
    }
    return chosen_list();
}

namespace {

// Basis of {v in span(rows) : supp(v) within J}, with each kernel element
// carried alongside a lift through the same row operations. J is a block set.
struct KernelResult {
    std::vector<F2Vec> kernel;
    std::vector<F2Vec> lifts;
};

KernelResult support_kernel(const std::vector<F2Vec> &rows,
                            const std::vector<F2Vec> &lifts,
                            const BlockLayout &lay, const std::vector<uint32_t> &J) {
    std::vector<bool> in_J(lay.m + 1, false);
    for (uint32_t b : J) in_J[b] = true;
    auto outside_pivot = [&](const F2Vec &f) -> int {
        for (uint32_t c : f.ones())
            if (!in_J[lay.block_of(c)]) return int(c);
        return -1;
    };
    std::vector<std::pair<F2Vec, F2Vec>> outside_rows; // pivot outside J
    KernelResult res;
    std::vector<int> kernel_pivots;
    for (size_t r = 0; r < rows.size(); r++) {
        F2Vec f = rows[r];
        F2Vec g = lifts[r];
        for (const auto &[rf, rg] : outside_rows) {
            uint32_t p = uint32_t(outside_pivot(rf));
            if (f.get(p)) {
                f ^= rf;
                g ^= rg;
            }
        }
        for (size_t t = 0; t < res.kernel.size(); t++)
            if (f.get(uint32_t(kernel_pivots[t]))) {
                f ^= res.kernel[t];
                g ^= res.lifts[t];
            }
        if (f.is_zero()) continue;
        int p = outside_pivot(f);
        if (p >= 0) {
            outside_rows.emplace_back(std::move(f), std::move(g));
        } else {
            kernel_pivots.push_back(f.lowest());
            res.kernel.push_back(std::move(f));
            res.lifts.push_back(std::move(g));
        }
    }
    return res;
}

// Smallest block set J (by size, then lex) whose kernel exceeds |J|, with a
// minimal dangerous set and lifts; nullopt when safe.
struct DangerFind {
    std::vector<uint32_t> T;
    std::vector<F2Vec> dangerous;
    std::vector<F2Vec> lifts;
};

std::optional<DangerFind> find_minimal_dangerous(const std::vector<F2Vec> &rows,
                                                 const std::vector<F2Vec> &lifts,
                                                 const BlockLayout &lay) {
    uint32_t m = lay.m;
    for (uint32_t s = 0; s <= m; s++) {
        // all size-s block subsets in lexicographic order
        std::vector<uint32_t> idx(s);
        for (uint32_t t = 0; t < s; t++) idx[t] = t + 1;
        while (true) {
            KernelResult kr = support_kernel(rows, lifts, lay, idx);
            if (kr.kernel.size() > s) {
                DangerFind df;
                df.T = idx;
                for (uint32_t t = 0; t <= s; t++) {
                    df.dangerous.push_back(kr.kernel[t]);
                    df.lifts.push_back(kr.lifts[t]);
                }
                return df;
            }
            // next combination
            int t = int(s) - 1;
            while (t >= 0 && idx[uint32_t(t)] == m - s + uint32_t(t) + 1) t--;
            if (t < 0) break;
            idx[uint32_t(t)]++;
            for (uint32_t u = uint32_t(t) + 1; u < s; u++) idx[u] = idx[u - 1] + 1;
        }
    }
    return std::nullopt;
}

} // namespace

SafeReport is_safe(const FormSet &v) {
    SafeReport rep;
    std::vector<F2Vec> basis = reduce_forms(v.forms);
    std::vector<uint32_t> cols = max_block_distinct_independent_cols(basis, v.lay);
    if (cols.size() == basis.size()) {
        rep.safe = true;
        rep.witness_cols = cols;
        return rep;
    }
    auto df = find_minimal_dangerous(basis, basis, v.lay);
    if (!df) throw std::logic_error("is_safe: matroid and search disagree");
    rep.safe = false;
    rep.dangerous = df->dangerous;
    return rep;
}

namespace {

struct ExtensionState {
    std::vector<uint32_t> S;        // sorted closure-so-far
    std::vector<F2Vec> W;
    std::vector<uint32_t> I;        // chosen columns
};

void closure_loop(const FormSet &v, ExtensionState &st) {
    while (true) {
        std::vector<F2Vec> cur;
        for (const F2Vec &f : v.forms) cur.push_back(zero_blocks(f, v.lay, st.S));
        // reduce while carrying lifts in the original span
        std::vector<F2Vec> basis, basis_lifts;
        {
            std::vector<std::pair<F2Vec, F2Vec>> rows;
            for (size_t r = 0; r < cur.size(); r++) {
                F2Vec f = cur[r], g = v.forms[r];
                for (auto &[rf, rg] : rows)
                    if (f.get(uint32_t(rf.lowest()))) {
                        f ^= rf;
                        g ^= rg;
                    }
                if (f.is_zero()) continue;
                for (auto &[rf, rg] : rows)
                    if (rf.get(uint32_t(f.lowest()))) {
                        rf ^= f;
                        rg ^= g;
                    }
                rows.emplace_back(std::move(f), std::move(g));
            }
            std::sort(rows.begin(), rows.end(), [](const auto &a, const auto &b) {
                return a.first.lowest() < b.first.lowest();
            });
            for (auto &[f, g] : rows) {
                basis.push_back(std::move(f));
                basis_lifts.push_back(std::move(g));
            }
        }
        auto df = find_minimal_dangerous(basis, basis_lifts, v.lay);
        if (!df) return;
        uint32_t h = uint32_t(df->T.size());
        // X: the first h forms of the minimal dangerous set, which are safe
        std::vector<F2Vec> X(df->dangerous.begin(), df->dangerous.begin() + h);
        std::vector<uint32_t> cols = max_block_distinct_independent_cols(X, v.lay);
        if (cols.size() != h)
            throw std::logic_error("closure_loop: missing column witness for safe X");
        for (uint32_t c : cols) st.I.push_back(c);
        for (uint32_t t = 0; t < h; t++) st.W.push_back(df->lifts[t]);
        for (uint32_t b : df->T) st.S.push_back(b);
        std::sort(st.S.begin(), st.S.end());
    }
}

} // namespace

std::vector<uint32_t> closure(const FormSet &v) {
    ExtensionState st;
    closure_loop(v, st);
    return st.S;
}

uint32_t sdim(const FormSet &v) {
    std::vector<uint32_t> cl = closure(v);
    return uint32_t(cl.size()) + dim_of(remove_blocks(v, cl).forms);
}

FormSet safe_extension(const FormSet &v, const std::vector<F2Vec> &U) {
    std::vector<F2Vec> span_basis = reduce_forms(v.forms);
    if (dim_of(U) != U.size())
        throw std::invalid_argument("safe_extension: U is not independent");
    for (const F2Vec &u : U)
        if (!in_span(u, span_basis))
            throw std::invalid_argument("safe_extension: U outside the span");

    ExtensionState st;
    closure_loop(v, st);
    std::vector<F2Vec> U_rem;
    for (const F2Vec &u : U) U_rem.push_back(zero_blocks(u, v.lay, st.S));
    if (dim_of(U_rem) != U.size())
        throw std::invalid_argument("safe_extension: U drops rank after closure removal");

    // basis of V[\S] extending U[\S], with lifts back into the span of V
    std::vector<F2Vec> basis, lifts;
    for (size_t r = 0; r < U_rem.size(); r++) {
        basis.push_back(U_rem[r]);
        lifts.push_back(U[r]);
    }
    auto try_add = [&](const F2Vec &f, const F2Vec &g) {
        std::vector<F2Vec> probe = basis;
        probe.push_back(f);
        if (dim_of(probe) == basis.size()) return;
        basis.push_back(f);
        lifts.push_back(g);
    };
    for (const F2Vec &f : v.forms) {
        F2Vec z = zero_blocks(f, v.lay, st.S);
        if (!z.is_zero()) try_add(z, f);
    }

    FormSet w(v.lay);
    for (const F2Vec &g : st.W) w.forms.push_back(g);
    for (const F2Vec &g : lifts) w.forms.push_back(g);
    return w;
}

bool brute_force_safe(const FormSet &v, uint32_t max_m) {
    if (v.lay.m > max_m) throw std::invalid_argument("brute_force_safe: m over cap");
    uint32_t k = dim_of(v.forms);
    for (uint32_t mask = 0; mask < (uint32_t(1) << v.lay.m); mask++) {
        std::vector<uint32_t> J;
        for (uint32_t b = 1; b <= v.lay.m; b++)
            if ((mask >> (b - 1)) & 1) J.push_back(b);
        if (dim_of(remove_blocks(v, J).forms) + J.size() < k) return false;
    }
    return true;
}

std::vector<uint32_t> brute_force_closure(const FormSet &v, uint32_t max_m) {
    if (v.lay.m > max_m) throw std::invalid_argument("brute_force_closure: m over cap");
    std::vector<std::vector<uint32_t>> best;
    size_t best_size = v.lay.m + 1;
    for (uint32_t mask = 0; mask < (uint32_t(1) << v.lay.m); mask++) {
        std::vector<uint32_t> I;
        for (uint32_t b = 1; b <= v.lay.m; b++)
            if ((mask >> (b - 1)) & 1) I.push_back(b);
        if (I.size() > best_size) continue;
        if (!brute_force_safe(remove_blocks(v, I), max_m)) continue;
        if (I.size() < best_size) {
            best.clear();
            best_size = I.size();
        }
        best.push_back(I);
    }
    return best.empty() ? std::vector<uint32_t>{} : best.front();
}

uint32_t brute_force_max_safe_dim(const FormSet &v) {
    std::vector<F2Vec> basis = reduce_forms(v.forms);
    uint32_t k = uint32_t(basis.size());
    if (k > 4) throw std::invalid_argument("brute_force_max_safe_dim: dim over cap");
    std::vector<F2Vec> span_elems;
    for (uint32_t mask = 1; mask < (uint32_t(1) << k); mask++) {
        F2Vec f(v.lay.nvars());
        for (uint32_t r = 0; r < k; r++)
            if ((mask >> r) & 1) f ^= basis[r];
        span_elems.push_back(f);
    }
    uint32_t best = 0;
    for (uint32_t mask = 0; mask < (uint32_t(1) << span_elems.size()); mask++) {
        std::vector<F2Vec> sub;
        for (size_t t = 0; t < span_elems.size(); t++)
            if ((mask >> t) & 1) sub.push_back(span_elems[t]);
        uint32_t d = dim_of(sub);
        if (d <= best) continue;
        if (brute_force_safe(FormSet(v.lay, sub))) best = d;
    }
    return best;
}

std::string format_formset(const FormSet &v) {
    std::ostringstream os;
    os << "blocks m=" << v.lay.m << " l=" << v.lay.l << '\n';
    for (const F2Vec &f : v.forms) os << format_parity(Parity(f, false)) << '\n';
    return os.str();
}

FormSet parse_formset(const std::string &text) {
    std::istringstream is(text);
    std::string line;
    FormSet out;
    bool have_header = false;
    while (std::getline(is, line)) {
        std::string body = line;
        if (auto h = body.find('#'); h != std::string::npos) body.resize(h);
        if (body.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!have_header) {
            unsigned m = 0, l = 0;
            if (sscanf(body.c_str(), "blocks m=%u l=%u", &m, &l) != 2 || !m || !l)
                throw std::invalid_argument("parse_formset: bad header '" + line + "'");
            out.lay = BlockLayout(m, l);
            have_header = true;
            continue;
        }
        Parity p = parse_parity(body, out.lay.nvars());
        if (p.constant) throw std::invalid_argument("parse_formset: nonzero rhs");
        out.forms.push_back(p.form);
    }
    if (!have_header) throw std::invalid_argument("parse_formset: missing header");
    return out;
}

} // namespace wb
