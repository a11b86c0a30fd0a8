#include "wb/sim.hh"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace wb {

namespace {

std::vector<Rat> uniform_weights(size_t k) {
    return std::vector<Rat>(k, rat(1, long(k)));
}

std::vector<Rat> coin_weights() { return {rat(1, 2), rat(1, 2)}; }

std::string bits_str(uint32_t y, uint32_t l) {
    std::string s;
    for (uint32_t j = 1; j <= l; j++) s += char('0' + ((y >> (j - 1)) & 1));
    return s;
}

Parity reduce_mod(Parity p, const LinSys &reduced) {
    for (const Parity &row : reduced.eqs) {
        int piv = row.form.lowest();
        if (piv >= 0 && p.form.get(uint32_t(piv))) {
            p.form ^= row.form;
            p.constant ^= row.constant;
        }
    }
    return p;
}

Parity bit_equation(uint32_t n, uint32_t v, bool value) {
    F2Vec f(n);
    f.set(v, true);
    return Parity{f, value};
}

// solved must fix exactly the marked blocks and have the same solutions as L
void check_solved_form(const LinSys &raw, const AffRestr &solved,
                       const std::vector<char> &fixed_blocks, const BlockLayout &lay) {
    for (uint32_t i = 1; i <= lay.m; i++)
        for (uint32_t j = 1; j <= lay.l; j++)
            if (solved.fixes(lay.var(i, j)) != bool(fixed_blocks[i]))
                throw SimInvariantViolation("solved form does not fix exactly the fixed blocks");
    LinSys graph = solved.graph_system();
    if (!implies(raw, graph) || !implies(graph, raw))
        throw SimInvariantViolation("equations and solved form have different solutions");
}

} // namespace

std::vector<uint32_t> block_completions(const AffRestr &solved, uint32_t i,
                                        const BlockLayout &lay) {
    uint32_t base = 0;
    int varying = 0;
    for (uint32_t j = 1; j <= lay.l; j++) {
        const Parity &val = solved.fixed.at(lay.var(i, j));
        if (val.form.any()) {
            if (varying) throw SimInvariantViolation("fixed block has two undetermined bits");
            varying = int(j);
        } else if (val.constant) {
            base |= uint32_t(1) << (j - 1);
        }
    }
    if (!varying) return {base};
    return {base, base | (uint32_t(1) << (varying - 1))};
}

namespace {

void check_path_implied(const LinSys &have, const std::vector<Parity> &path,
                        const char *msg) {
    LinSys ps(have.n);
    for (const Parity &e : path) ps.add(e);
    if (!implies(have, ps)) throw SimInvariantViolation(msg);
}

uint32_t flip_bit(uint32_t y, uint32_t j) { return y ^ (uint32_t(1) << (j - 1)); }

} // namespace

std::string format_transcript(const SimTranscript &tr) {
    std::ostringstream out;
    for (const SimStep &s : tr.steps) {
        out << "iter " << s.iter << " node " << s.node << ": " << format_parity(s.live);
        if (s.block) out << " | block " << s.block << " bit " << s.bit;
        if (!s.note.empty()) out << " | " << s.note;
        out << "\n";
    }
    out << (tr.fail ? "FAIL" : "ok");
    if (!tr.status.empty() && tr.status != "ok") out << ": " << tr.status;
    if (tr.leaf >= 0) out << " at leaf " << tr.leaf;
    out << "\n";
    return out.str();
}

TcollResult sim_tcoll(const std::vector<uint32_t> &holes, uint32_t t, const Pdt &tree,
                      const BlockLayout &lay, RandomTape &tape, bool check) {
    if (t < 2) throw std::invalid_argument("collision arity must be at least 2");
    if (tree.nvars != lay.nvars()) throw std::invalid_argument("tree is not on the block variables");
    std::set<uint32_t> aset(holes.begin(), holes.end());
    if (aset.empty()) throw std::invalid_argument("no available holes");
    for (uint32_t y : aset)
        if (y >= lay.holes()) throw std::invalid_argument("hole out of range");
    std::vector<uint32_t> avec(aset.begin(), aset.end());

    TcollResult res;
    res.eqs = LinSys(lay.nvars());
    res.solved = AffRestr(lay.nvars());
    std::vector<char> fixed(lay.m + 1, 0);
    std::vector<Parity> path;
    int v = 0;
    uint32_t iter = 0;
    const uint32_t budget = lay.m * lay.l + 2 * tree.depth() + 4;

    while (!tree.nodes[v].leaf) {
        if (iter > budget) throw std::logic_error("simulation passed its step budget");
        const Parity &orig = tree.nodes[v].query;
        Parity P = substitute(orig, res.solved);
        SimStep step;
        step.iter = iter;
        step.node = v;
        step.live = P;

        if (P.form.is_zero()) {
            bool b = P.constant;
            path.push_back(outcome_equation(orig, b));
            v = tree.nodes[v].child[b];
            step.note = std::string("determined, branch ") + (b ? '1' : '0');
        } else {
            uint32_t v0 = uint32_t(P.form.lowest());
            uint32_t i = lay.block_of(v0), j = lay.coord_of(v0);
            if (fixed[i]) throw std::logic_error("live query touches a fixed block");
            uint32_t y = avec[tape.choose("hole", uniform_weights(avec.size()))];
            AffRestr sigma(lay.nvars());
            for (uint32_t h = 1; h <= lay.l; h++)
                if (h != j) sigma.fix_const(lay.var(i, h), (y >> (h - 1)) & 1);
            uint32_t yf = flip_bit(y, j);
            std::ostringstream note;
            note << "hole " << bits_str(y, lay.l);
            if (!aset.count(yf)) {
                sigma.fix_const(v0, (y >> (j - 1)) & 1);
                for (uint32_t h = 1; h <= lay.l; h++)
                    if (h != j) res.eqs.add(bit_equation(lay.nvars(), lay.var(i, h), (y >> (h - 1)) & 1));
                res.eqs.add(bit_equation(lay.nvars(), v0, (y >> (j - 1)) & 1));
                res.used.push_back({y});
                note << ", flip leaves the hole set, block fixed";
            } else {
                bool b = tape.choose("branch", coin_weights());
                Parity rest = substitute(P, sigma);
                if (!rest.form.get(v0)) throw std::logic_error("chosen bit dropped out of the query");
                Parity val;
                val.form = rest.form;
                val.form.set(v0, false);
                val.constant = rest.constant ^ b;
                sigma.fix(v0, val);
                for (uint32_t h = 1; h <= lay.l; h++)
                    if (h != j) res.eqs.add(bit_equation(lay.nvars(), lay.var(i, h), (y >> (h - 1)) & 1));
                res.eqs.add(outcome_equation(P, b));
                res.used.push_back({std::min(y, yf), std::max(y, yf)});
                path.push_back(outcome_equation(orig, b));
                v = tree.nodes[v].child[b];
                note << ", pair kept, branch " << (b ? '1' : '0');
            }
            fixed[i] = 1;
            res.solved = compose(res.solved, sigma);
            step.block = int(i);
            step.bit = int(j);
            step.note = note.str();
        }
        res.transcript.steps.push_back(step);
        iter++;

        if (check) {
            check_solved_form(res.eqs, res.solved, fixed, lay);
            for (uint32_t bi = 1; bi <= lay.m; bi++) {
                if (!fixed[bi]) continue;
                for (uint32_t c : block_completions(res.solved, bi, lay))
                    if (!aset.count(c))
                        throw SimInvariantViolation("fixed block can leave the hole set");
            }
            check_path_implied(res.eqs, path, "equations do not imply the path constraints");
        }
    }

    res.leaf = v;
    std::map<uint32_t, uint32_t> load;
    for (const auto &entry : res.used)
        for (uint32_t y : entry) load[y]++;
    for (const auto &[y, c] : load)
        if (c >= t) res.fail = true;
    for (uint32_t i = 1; i <= lay.m; i++)
        if (!fixed[i]) res.free_blocks.push_back(i);
    res.transcript.fail = res.fail;
    res.transcript.leaf = res.leaf;
    res.transcript.status = res.fail ? "a hole repeats across enough fixed blocks" : "ok";
    return res;
}

std::vector<ColoredHole> color_multiset(const std::vector<uint32_t> &multiset) {
    std::map<uint32_t, uint32_t> cnt;
    for (uint32_t y : multiset) cnt[y]++;
    std::vector<ColoredHole> out;
    for (const auto &[y, c] : cnt) {
        if (c > 2) throw std::invalid_argument("a string appears more than twice");
        out.push_back({y, kBlue});
        if (c == 2) out.push_back({y, kRed});
    }
    return out;
}

PermResult sim_perm(const std::vector<uint32_t> &multiset, uint32_t l, const Pdt &tree,
                    RandomTape &tape, bool check) {
    BlockLayout lay{uint32_t(multiset.size()), l};
    if (lay.m == 0) throw std::invalid_argument("empty multiset");
    if (tree.nvars != lay.nvars()) throw std::invalid_argument("tree is not on the block variables");
    for (uint32_t y : multiset)
        if (y >= lay.holes()) throw std::invalid_argument("string out of range");
    const std::vector<ColoredHole> sprime = color_multiset(multiset);
    std::vector<ColoredHole> A = sprime;
    std::vector<ColoredHole> removed;

    PermResult res;
    res.eqs = LinSys(lay.nvars());
    res.solved = AffRestr(lay.nvars());
    res.colors.assign(lay.m + 1, -1);
    std::vector<char> fixed(lay.m + 1, 0);
    uint32_t nfree = lay.m;
    std::vector<Parity> path;
    const uint32_t d = tree.depth();
    int v = 0;
    uint32_t iter = 0;
    const uint32_t budget = lay.m * lay.l + 2 * d + 4;

    auto col_sum = [&](uint32_t j) {
        bool s = false;
        for (const auto &[y, c] : A) s ^= (y >> (j - 1)) & 1;
        return s;
    };
    auto free_column = [&](uint32_t j) {
        F2Vec f(lay.nvars());
        for (uint32_t i = 1; i <= lay.m; i++)
            if (!fixed[i]) f.set(lay.var(i, j), true);
        return f;
    };
    auto rebuild_lf = [&]() {
        LinSys lf(lay.nvars());
        for (uint32_t j = 1; j <= lay.l; j++) lf.add(Parity{free_column(j), col_sum(j)});
        return lf;
    };
    auto remove_hole = [&](const ColoredHole &h) {
        auto it = std::find(A.begin(), A.end(), h);
        if (it == A.end()) throw std::logic_error("hole to remove is not available");
        removed.push_back(*it);
        A.erase(it);
    };
    LinSys lf = rebuild_lf();

    while (!tree.nodes[v].leaf) {
        if (iter > budget) throw std::logic_error("simulation passed its step budget");
        const Parity &orig = tree.nodes[v].query;
        Parity P = substitute(orig, res.solved);
        SimStep step;
        step.iter = iter;
        step.node = v;
        step.live = P;
        Parity r = reduce_mod(P, row_reduce(lf));

        if (r.form.is_zero()) {
            bool b = r.constant;
            path.push_back(outcome_equation(orig, b));
            v = tree.nodes[v].child[b];
            step.note = std::string("determined by the column sums, branch ") + (b ? '1' : '0');
        } else {
            uint32_t j = 0;
            for (uint32_t h = 1; h <= lay.l && !j; h++) {
                F2Vec pr = proj(P, h, lay);
                if (!pr.is_zero() && !(pr == free_column(h))) j = h;
            }
            if (!j) throw std::logic_error("undetermined query with trivial projections");
            std::ostringstream note;
            F2Vec prj = proj(P, j, lay);
            if (2 * prj.popcount() > nfree) {
                P.form ^= free_column(j);
                P.constant ^= col_sum(j);
                prj = proj(P, j, lay);
                note << "folded through the column sum, ";
            }
            step.live = P;
            uint32_t i = lay.block_of(uint32_t(prj.lowest()));
            auto [y, c] = A[tape.choose("hole", uniform_weights(A.size()))];
            uint32_t yf = flip_bit(y, j);
            bool pair = c == kBlue &&
                        std::find(A.begin(), A.end(), ColoredHole{yf, kBlue}) != A.end();
            AffRestr sigma(lay.nvars());
            note << "hole " << bits_str(y, l) << (c == kRed ? " red" : " blue");

            if (!pair) {
                for (uint32_t h = 1; h <= lay.l; h++) {
                    sigma.fix_const(lay.var(i, h), (y >> (h - 1)) & 1);
                    res.eqs.add(bit_equation(lay.nvars(), lay.var(i, h), (y >> (h - 1)) & 1));
                }
                res.colors[i] = c;
                remove_hole({y, c});
                fixed[i] = 1;
                nfree--;
                note << ", block " << i << " fixed";
            } else {
                std::vector<uint32_t> others;
                for (uint32_t ii = 1; ii <= lay.m; ii++)
                    if (!fixed[ii] && ii != i) others.push_back(ii);
                if (others.empty()) throw std::logic_error("no free partner block");
                uint32_t g = others[tape.choose("partner", uniform_weights(others.size()))];
                for (uint32_t h = 1; h <= lay.l; h++) {
                    if (h == j) continue;
                    sigma.fix_const(lay.var(i, h), (y >> (h - 1)) & 1);
                    res.eqs.add(bit_equation(lay.nvars(), lay.var(i, h), (y >> (h - 1)) & 1));
                }
                for (uint32_t h = 1; h <= lay.l; h++) {
                    if (h == j) continue;
                    sigma.fix_const(lay.var(g, h), (y >> (h - 1)) & 1);
                    res.eqs.add(bit_equation(lay.nvars(), lay.var(g, h), (y >> (h - 1)) & 1));
                }
                F2Vec pairform(lay.nvars());
                pairform.set(lay.var(i, j), true);
                pairform.set(lay.var(g, j), true);
                res.eqs.add(Parity{pairform, true});
                remove_hole({y, kBlue});
                remove_hole({yf, kBlue});
                res.colors[i] = kBlue;
                res.colors[g] = kBlue;
                fixed[i] = fixed[g] = 1;
                nfree -= 2;
                res.pairs.push_back({i, g, y, j});
                note << ", paired with block " << g;
                bool b = tape.choose("branch", coin_weights());

                if (!prj.get(lay.var(g, j))) {
                    Parity rest = substitute(P, sigma);
                    if (!rest.form.get(lay.var(i, j)) || rest.form.get(lay.var(g, j)))
                        throw std::logic_error("pair bits entered the query unexpectedly");
                    Parity val;
                    val.form = rest.form;
                    val.form.set(lay.var(i, j), false);
                    val.constant = rest.constant ^ b;
                    sigma.fix(lay.var(i, j), val);
                    Parity valg = val;
                    valg.constant = !val.constant;
                    sigma.fix(lay.var(g, j), valg);
                    res.eqs.add(outcome_equation(P, b));
                    path.push_back(outcome_equation(orig, b));
                    v = tree.nodes[v].child[b];
                    note << ", query answered " << (b ? '1' : '0');
                } else {
                    sigma.fix_const(lay.var(i, j), b);
                    sigma.fix_const(lay.var(g, j), !b);
                    res.eqs.add(bit_equation(lay.nvars(), lay.var(i, j), b));
                    note << ", open bit sampled " << (b ? '1' : '0');
                }
            }
            res.solved = compose(res.solved, sigma);
            lf = rebuild_lf();
            step.block = int(i);
            step.bit = int(j);
            step.note = note.str();
        }
        res.transcript.steps.push_back(step);
        iter++;

        if (check) {
            check_solved_form(res.eqs, res.solved, fixed, lay);
            std::multiset<uint32_t> expect;
            for (const auto &[y, c] : removed) expect.insert(y);
            std::mt19937_64 srng(0x7e57ULL * (iter + 1));
            for (int rep = 0; rep < 3; rep++) {
                F2Vec fp(lay.nvars());
                for (uint32_t i = 1; i <= lay.m; i++)
                    if (!fixed[i]) lay.set_block(fp, i, uint32_t(srng()) & (lay.holes() - 1));
                F2Vec x = res.solved.extend(fp);
                std::multiset<uint32_t> got;
                for (uint32_t i = 1; i <= lay.m; i++)
                    if (fixed[i]) got.insert(lay.get_block(x, i));
                if (got != expect)
                    throw SimInvariantViolation("fixed blocks are not a permutation of the removed holes");
            }
            for (const auto &pf : res.pairs) {
                const Parity &vi = res.solved.fixed.at(lay.var(pf.i, pf.j));
                const Parity &vg = res.solved.fixed.at(lay.var(pf.g, pf.j));
                if (!(vi.form == vg.form) || vi.constant == vg.constant)
                    throw SimInvariantViolation("paired bits stopped disagreeing");
            }
            check_path_implied(union_sys(res.eqs, lf), path,
                               "equations and column sums do not imply the path constraints");
            if (A.size() + 2 * size_t(iter) < sprime.size())
                throw SimInvariantViolation("available holes shrank too fast");
        }
    }

    res.leaf = v;
    std::map<uint32_t, uint32_t> remcnt;
    for (const auto &[y, c] : removed) remcnt[y]++;
    bool coll = false;
    for (const auto &[y, c] : remcnt)
        if (c >= 2) coll = true;
    res.fail = coll || iter > 8 * d;
    res.avail = A;
    res.perm_eqs = lf;
    for (uint32_t i = 1; i <= lay.m; i++)
        if (!fixed[i]) res.free_blocks.push_back(i);
    res.transcript.fail = res.fail;
    res.transcript.leaf = res.leaf;
    res.transcript.status =
        coll ? "both copies of a string were used" : res.fail ? "too many iterations" : "ok";
    return res;
}

LiftResult sim_lift(const PartialVals &rho, const Pdt &tree, const HardnessFamily &family,
                    const Gadget &g, RandomTape &tape, bool check) {
    if (g.out_bits != family.l)
        throw std::invalid_argument("gadget output width and family alphabet disagree");
    if (rho.size() != family.n)
        throw std::invalid_argument("restriction length and family size disagree");
    BlockLayout lay{family.n, g.arity};
    if (tree.nvars != lay.nvars())
        throw std::invalid_argument("tree is not on the lifted variables");
    for (const Pdt::Node &nd : tree.nodes) {
        if (nd.leaf) continue;
        for (uint32_t v0 : nd.query.form.ones())
            if (rho[lay.block_of(v0) - 1])
                throw std::invalid_argument("tree queries a block fixed by the restriction");
    }

    LiftResult res;
    res.z = family.sample(rho, tape);
    if (res.z.size() != family.n) throw std::logic_error("family sample has the wrong length");
    if (!consistent_with(rho, res.z)) throw std::logic_error("family sample ignores the restriction");
    res.sigma.assign(family.n, std::nullopt);
    res.eqs = LinSys(lay.nvars());
    res.solved = AffRestr(lay.nvars());
    std::vector<char> fixed(lay.m + 1, 0);
    std::vector<Parity> path;
    int v = 0;
    uint32_t iter = 0;
    const uint32_t budget = lay.m * lay.l + 2 * tree.depth() + 4;
    std::vector<Rat> mix = {Rat(1) - g.delta, g.delta};

    auto draw_from = [&](const std::map<uint32_t, Rat> &mass, const char *what) {
        std::vector<uint32_t> support;
        std::vector<Rat> weights;
        for (const auto &[u, w] : mass) {
            support.push_back(u);
            weights.push_back(w);
        }
        if (support.empty()) throw std::logic_error("empty mixture part");
        return support[tape.choose(what, weights)];
    };

    while (!tree.nodes[v].leaf) {
        if (iter > budget) throw std::logic_error("simulation passed its step budget");
        const Parity &orig = tree.nodes[v].query;
        Parity P = substitute(orig, res.solved);
        SimStep step;
        step.iter = iter;
        step.node = v;
        step.live = P;

        if (P.form.is_zero()) {
            bool b = P.constant;
            path.push_back(outcome_equation(orig, b));
            v = tree.nodes[v].child[b];
            step.note = std::string("determined, branch ") + (b ? '1' : '0');
        } else {
            uint32_t v0 = uint32_t(P.form.lowest());
            uint32_t i = lay.block_of(v0), j = lay.coord_of(v0);
            if (fixed[i]) throw std::logic_error("live query touches a fixed block");
            uint32_t zi = res.z[i - 1];
            res.sigma[i - 1] = zi;
            std::ostringstream note;
            note << "queried z" << i << " = " << bits_str(zi, family.l);
            AffRestr sigma(lay.nvars());
            uint32_t mixed = tape.choose("mix", mix);

            if (mixed) {
                uint32_t u = draw_from(g.part_b.at(zi * g.arity + (j - 1)), "input");
                for (uint32_t h = 1; h <= lay.l; h++) {
                    if (h == j) continue;
                    sigma.fix_const(lay.var(i, h), (u >> (h - 1)) & 1);
                    res.eqs.add(bit_equation(lay.nvars(), lay.var(i, h), (u >> (h - 1)) & 1));
                }
                bool b = tape.choose("branch", coin_weights());
                Parity rest = substitute(P, sigma);
                if (!rest.form.get(v0)) throw std::logic_error("chosen bit dropped out of the query");
                Parity val;
                val.form = rest.form;
                val.form.set(v0, false);
                val.constant = rest.constant ^ b;
                sigma.fix(v0, val);
                res.eqs.add(outcome_equation(P, b));
                path.push_back(outcome_equation(orig, b));
                v = tree.nodes[v].child[b];
                note << ", boundary part " << bits_str(u, g.arity) << ", branch " << (b ? '1' : '0');
            } else {
                uint32_t u = draw_from(g.part_a.at(zi * g.arity + (j - 1)), "input");
                for (uint32_t h = 1; h <= lay.l; h++) {
                    sigma.fix_const(lay.var(i, h), (u >> (h - 1)) & 1);
                    res.eqs.add(bit_equation(lay.nvars(), lay.var(i, h), (u >> (h - 1)) & 1));
                }
                note << ", core part " << bits_str(u, g.arity) << ", block fixed";
            }
            fixed[i] = 1;
            res.solved = compose(res.solved, sigma);
            step.block = int(i);
            step.bit = int(j);
            step.note = note.str();
        }
        res.transcript.steps.push_back(step);
        iter++;

        if (check) {
            check_solved_form(res.eqs, res.solved, fixed, lay);
            for (uint32_t bi = 1; bi <= lay.m; bi++) {
                if (!fixed[bi]) continue;
                if (!res.sigma[bi - 1])
                    throw SimInvariantViolation("fixed block was never queried");
                for (uint32_t u : block_completions(res.solved, bi, lay))
                    if (g.eval(u) != res.z[bi - 1])
                        throw SimInvariantViolation("fixed block can decode to the wrong value");
            }
            for (uint32_t bi = 1; bi <= lay.m; bi++)
                if (res.sigma[bi - 1] && (!fixed[bi] || *res.sigma[bi - 1] != res.z[bi - 1]))
                    throw SimInvariantViolation("queried values drifted from the sample");
            check_path_implied(res.eqs, path, "equations do not imply the path constraints");
        }
    }

    res.leaf = v;
    res.fail = !family.member(merge_partial(rho, res.sigma));
    for (uint32_t i = 1; i <= lay.m; i++)
        if (!fixed[i]) res.free_blocks.push_back(i);
    res.transcript.fail = res.fail;
    res.transcript.leaf = res.leaf;
    res.transcript.status = res.fail ? "revealed values left the hard set" : "ok";
    return res;
}

F2Vec not_sink_witness_tcoll(const TcollResult &res, const std::vector<uint32_t> &holes,
                             uint32_t t, const std::vector<uint32_t> &index_set,
                             const Pdt &tree, const BlockLayout &lay) {
    if (res.fail) throw std::invalid_argument("witness needs a successful run");
    std::set<uint32_t> aset(holes.begin(), holes.end());
    std::vector<uint32_t> avec(aset.begin(), aset.end());
    if (avec.size() < 3) throw std::invalid_argument("needs at least three available holes");
    if (index_set.size() != t) throw std::invalid_argument("index set has the wrong size");
    std::set<uint32_t> iset(index_set.begin(), index_set.end());
    if (iset.size() != t) throw std::invalid_argument("index set repeats a block");
    for (uint32_t i : iset)
        if (i < 1 || i > lay.m) throw std::invalid_argument("block out of range");

    std::set<uint32_t> fset(res.free_blocks.begin(), res.free_blocks.end());
    std::vector<uint32_t> in_free, in_fixed;
    for (uint32_t i : iset) (fset.count(i) ? in_free : in_fixed).push_back(i);

    F2Vec fp(lay.nvars());
    for (uint32_t i : res.free_blocks) lay.set_block(fp, i, avec[0]);
    if (in_free.size() >= 2) {
        lay.set_block(fp, in_free[0], avec[0]);
        lay.set_block(fp, in_free[1], avec[1]);
    } else if (in_free.size() == 1) {
        std::vector<uint32_t> avoid = block_completions(res.solved, in_fixed[0], lay);
        for (uint32_t y : avec) {
            if (std::find(avoid.begin(), avoid.end(), y) == avoid.end()) {
                lay.set_block(fp, in_free[0], y);
                break;
            }
        }
    }
    F2Vec x = res.solved.extend(fp);

    if (tree.run(x) != res.leaf) throw SimInvariantViolation("witness misses the leaf");
    for (uint32_t i = 1; i <= lay.m; i++)
        if (!aset.count(lay.get_block(x, i)))
            throw SimInvariantViolation("witness leaves the hole set");
    std::set<uint32_t> vals;
    for (uint32_t i : iset) vals.insert(lay.get_block(x, i));
    if (vals.size() == 1) throw SimInvariantViolation("witness blocks still collide");
    return x;
}

F2Vec not_sink_witness_perm(const PermResult &res, const std::vector<uint32_t> &multiset,
                            uint32_t l, uint32_t i1, uint32_t i2, const Pdt &tree) {
    if (res.fail) throw std::invalid_argument("witness needs a successful run");
    BlockLayout lay{uint32_t(multiset.size()), l};
    if (i1 == i2 || i1 < 1 || i2 < 1 || i1 > lay.m || i2 > lay.m)
        throw std::invalid_argument("need two distinct blocks in range");
    if (res.avail.size() < 3) throw std::invalid_argument("needs at least three available holes");

    std::set<uint32_t> fset(res.free_blocks.begin(), res.free_blocks.end());
    std::vector<ColoredHole> pool = res.avail;
    std::map<uint32_t, uint32_t> want; // block, forced string
    bool f1 = fset.count(i1), f2 = fset.count(i2);

    auto take = [&](uint32_t y) {
        for (auto it = pool.begin(); it != pool.end(); ++it)
            if (it->first == y) {
                pool.erase(it);
                return;
            }
        throw std::logic_error("forced string is not available");
    };

    if (f1 && f2) {
        uint32_t y1 = pool[0].first;
        uint32_t y2 = y1;
        for (const auto &[y, c] : pool)
            if (y != y1) {
                y2 = y;
                break;
            }
        if (y2 == y1) throw SimInvariantViolation("available holes collapsed to one string");
        want[i1] = y1;
        want[i2] = y2;
        take(y1);
        take(y2);
    } else if (f1 || f2) {
        uint32_t fr = f1 ? i1 : i2, fx = f1 ? i2 : i1;
        std::vector<uint32_t> avoid = block_completions(res.solved, fx, lay);
        bool found = false;
        for (const auto &[y, c] : pool) {
            if (std::find(avoid.begin(), avoid.end(), y) == avoid.end()) {
                want[fr] = y;
                take(y);
                found = true;
                break;
            }
        }
        if (!found) throw SimInvariantViolation("every available string is reachable by the fixed block");
    }

    F2Vec fp(lay.nvars());
    size_t at = 0;
    for (uint32_t i : res.free_blocks) {
        auto it = want.find(i);
        if (it != want.end()) {
            lay.set_block(fp, i, it->second);
        } else {
            lay.set_block(fp, i, pool[at].first);
            at++;
        }
    }
    if (at != pool.size()) throw std::logic_error("free blocks and available holes disagree");
    F2Vec x = res.solved.extend(fp);

    if (tree.run(x) != res.leaf) throw SimInvariantViolation("witness misses the leaf");
    std::multiset<uint32_t> got, expect(multiset.begin(), multiset.end());
    for (uint32_t i = 1; i <= lay.m; i++) got.insert(lay.get_block(x, i));
    if (got != expect) throw SimInvariantViolation("witness is not a permutation of the multiset");
    if (lay.get_block(x, i1) == lay.get_block(x, i2))
        throw SimInvariantViolation("witness blocks still collide");
    return x;
}

F2Vec not_sink_witness_lift(const LiftResult &res, const PartialVals &rho,
                            const SearchProblem &base, const Output &o,
                            const HardnessFamily &family, const Gadget &g,
                            const Pdt &tree) {
    if (res.fail) throw std::invalid_argument("witness needs a successful run");
    if (base.lay.m != family.n || base.lay.l != family.l)
        throw std::invalid_argument("base problem is not on the family layout");
    PartialVals known = merge_partial(rho, res.sigma);
    std::vector<uint32_t> open;
    for (uint32_t i = 0; i < family.n; i++)
        if (!known[i]) open.push_back(i);
    if (open.size() * family.l > 24)
        throw std::runtime_error("witness search space is too large");

    // first completion of the revealed values that denies the output
    std::vector<uint32_t> y(family.n, 0);
    for (uint32_t i = 0; i < family.n; i++)
        if (known[i]) y[i] = *known[i];
    uint32_t width = uint32_t(1) << family.l;
    bool found = false;
    std::function<void(size_t)> dfs = [&](size_t at) {
        if (found) return;
        if (at == open.size()) {
            BlockVals bv;
            for (uint32_t i = 0; i < family.n; i++) bv.push_back(y[i]);
            if (!base.member(bv, o)) found = true;
            return;
        }
        for (uint32_t val = 0; val < width && !found; val++) {
            y[open[at]] = val;
            dfs(at + 1);
        }
    };
    dfs(0);
    if (!found) throw SimInvariantViolation("every completion certifies the output");

    BlockLayout lay{family.n, g.arity};
    auto preimage = [&](uint32_t out) {
        for (uint32_t u = 0; u < (uint32_t(1) << g.arity); u++)
            if (g.eval(u) == out) return u;
        throw std::invalid_argument("gadget misses an output value");
    };
    F2Vec fp(lay.nvars());
    std::set<uint32_t> fset(res.free_blocks.begin(), res.free_blocks.end());
    for (uint32_t i = 1; i <= lay.m; i++)
        if (fset.count(i) && !res.sigma[i - 1]) lay.set_block(fp, i, preimage(y[i - 1]));
    F2Vec x = res.solved.extend(fp);

    if (tree.run(x) != res.leaf) throw SimInvariantViolation("witness misses the leaf");
    BlockVals decoded;
    for (uint32_t i = 1; i <= lay.m; i++) decoded.push_back(g.eval(lay.get_block(x, i)));
    for (uint32_t i = 0; i < family.n; i++)
        if (decoded[i] != y[i]) throw SimInvariantViolation("witness decodes to the wrong base input");
    if (base.member(decoded, o)) throw SimInvariantViolation("witness still certifies the output");
    return x;
}

BinsGraph hypercube_bins(uint32_t l, const std::vector<uint32_t> &holes) {
    std::set<uint32_t> hs(holes.begin(), holes.end());
    for (uint32_t y : hs)
        if (y >= (uint32_t(1) << l)) throw std::invalid_argument("hole out of range");
    std::vector<uint32_t> hv(hs.begin(), hs.end());
    std::map<uint32_t, uint32_t> at;
    for (uint32_t k = 0; k < hv.size(); k++) at[hv[k]] = k;
    BinsGraph g;
    g.r = uint32_t(hv.size());
    for (uint32_t y : hv) {
        g.side.push_back(__builtin_popcount(y) & 1);
        for (uint32_t j = 1; j <= l; j++) {
            uint32_t yf = y ^ (uint32_t(1) << (j - 1));
            if (yf > y && at.count(yf)) g.edges.push_back({at[y], at[yf]});
        }
    }
    return g;
}

BinsGraph coll_bins(uint32_t l, const std::vector<uint32_t> &multiset) {
    std::map<uint32_t, uint32_t> cnt;
    for (uint32_t y : multiset) {
        if (y >= (uint32_t(1) << l)) throw std::invalid_argument("string out of range");
        if (++cnt[y] > 2) throw std::invalid_argument("a string appears more than twice");
    }
    std::vector<uint32_t> doubled, single;
    for (const auto &[y, c] : cnt) (c == 2 ? doubled : single).push_back(y);
    std::vector<uint32_t> blues = doubled;
    blues.insert(blues.end(), single.begin(), single.end());
    std::map<uint32_t, uint32_t> at;
    for (uint32_t k = 0; k < blues.size(); k++) at[blues[k]] = k;

    BinsGraph g;
    g.r = uint32_t(blues.size() + doubled.size());
    g.paired = uint32_t(doubled.size());
    for (uint32_t y : blues) {
        g.side.push_back(__builtin_popcount(y) & 1);
        for (uint32_t j = 1; j <= l; j++) {
            uint32_t yf = y ^ (uint32_t(1) << (j - 1));
            if (at.count(yf) && at[yf] > at[y]) g.edges.push_back({at[y], at[yf]});
        }
    }
    for (uint32_t y : doubled) g.side.push_back(__builtin_popcount(y) & 1);
    return g;
}

BinsStrategy empty_matching_strategy() {
    return [](const BinsState &) { return std::vector<std::pair<uint32_t, uint32_t>>(); };
}

BinsStrategy direction_strategy(uint32_t l, const std::vector<uint32_t> &holes) {
    std::set<uint32_t> hs(holes.begin(), holes.end());
    std::vector<uint32_t> hv(hs.begin(), hs.end());
    std::map<uint32_t, uint32_t> at;
    for (uint32_t k = 0; k < hv.size(); k++) at[hv[k]] = k;
    return [l, hv, at](const BinsState &st) {
        uint32_t j = 1 + st.iter % l;
        std::set<uint32_t> ok(st.eligible.begin(), st.eligible.end());
        std::vector<std::pair<uint32_t, uint32_t>> m;
        for (uint32_t u : st.eligible) {
            uint32_t yf = hv[u] ^ (uint32_t(1) << (j - 1));
            auto it = at.find(yf);
            if (it != at.end() && it->second > u && ok.count(it->second))
                m.push_back({u, it->second});
        }
        return m;
    };
}

BallsResult balls_bins(const BinsGraph &g, const BinsStrategy &strategy, uint32_t d,
                       uint32_t t, RandomTape &tape, BinsPick mode) {
    if (t < 2) throw std::invalid_argument("collision arity must be at least 2");
    std::set<std::pair<uint32_t, uint32_t>> eset;
    for (auto [a, b] : g.edges) {
        if (a >= g.r || b >= g.r || a == b) throw std::invalid_argument("bad edge");
        eset.insert({std::min(a, b), std::max(a, b)});
    }
    BallsResult res;
    res.occupancy.assign(g.r, 0);

    for (uint32_t iter = 0; iter < d; iter++) {
        std::vector<uint32_t> eligible;
        for (uint32_t u = 0; u < g.r; u++) {
            bool occ = res.occupancy[u] > 0;
            if (mode == BinsPick::all_bins || (mode == BinsPick::empty_bins && !occ) ||
                (mode == BinsPick::nonempty_bins && occ))
                eligible.push_back(u);
        }
        if (eligible.empty()) {
            res.idle++;
            continue;
        }
        BinsState st{g, mode, iter, res.occupancy, eligible};
        auto matching = strategy(st);
        std::set<uint32_t> ok(eligible.begin(), eligible.end());
        std::map<uint32_t, uint32_t> partner;
        for (auto [a, b] : matching) {
            if (!eset.count({std::min(a, b), std::max(a, b)}))
                throw std::invalid_argument("strategy used an edge outside the graph");
            if (!ok.count(a) || !ok.count(b))
                throw std::invalid_argument("strategy matched an ineligible bin");
            if (partner.count(a) || partner.count(b))
                throw std::invalid_argument("strategy reused a bin");
            partner[a] = b;
            partner[b] = a;
        }
        uint32_t u = eligible[tape.choose("bin", uniform_weights(eligible.size()))];
        res.occupancy[u]++;
        auto it = partner.find(u);
        if (it != partner.end()) res.occupancy[it->second]++;
    }

    for (uint32_t c : res.occupancy)
        if (c >= t) res.t_collision = true;
    uint32_t s = g.r - g.paired;
    for (uint32_t i = 0; i < g.paired; i++)
        if (res.occupancy[i] > 0 && res.occupancy[s + i] > 0) res.pair_collision = true;
    return res;
}

std::map<int, Rat> pdt_distribution(const Pdt &tree,
                                    const std::vector<std::pair<F2Vec, Rat>> &inputs) {
    std::map<int, Rat> out;
    for (const auto &[x, w] : inputs) out[tree.run(x)] += w;
    return out;
}

} // namespace wb
