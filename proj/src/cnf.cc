#include "wb/cnf.hh"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wb {

void CnfFormula::add_clause(std::vector<Lit> c) {
    std::set<uint32_t> seen;
    for (Lit t : c) {
        if (t == 0) throw std::invalid_argument("add_clause: zero literal");
        uint32_t v = uint32_t(t > 0 ? t : -t);
        if (v > nvars()) throw std::invalid_argument("add_clause: variable out of range");
        seen.insert(v);
    }
    for (Lit t : c)
        if (std::find(c.begin(), c.end(), -t) != c.end())
            throw std::invalid_argument("add_clause: clause contains a variable and its negation");
    clauses.push_back(std::move(c));
}

uint32_t CnfFormula::width() const {
    size_t w = 0;
    for (const auto &c : clauses) w = std::max(w, c.size());
    return uint32_t(w);
}

uint32_t CnfFormula::block_width_of(const std::vector<Lit> &c) const {
    std::set<uint32_t> blocks;
    for (Lit t : c) blocks.insert(lay.block_of(uint32_t(t > 0 ? t : -t) - 1));
    return uint32_t(blocks.size());
}

uint32_t CnfFormula::block_width() const {
    uint32_t b = 0;
    for (const auto &c : clauses) b = std::max(b, block_width_of(c));
    return b;
}

bool eval_clause(const std::vector<Lit> &c, const std::vector<bool> &x) {
    for (Lit t : c) {
        uint32_t v = uint32_t(t > 0 ? t : -t);
        bool val = x[v - 1];
        if (t > 0 ? val : !val) return true;
    }
    return false;
}

bool eval_formula(const CnfFormula &phi, const std::vector<bool> &x) {
    for (const auto &c : phi.clauses)
        if (!eval_clause(c, x)) return false;
    return true;
}

bool brute_force_unsat(const CnfFormula &phi, uint32_t max_vars) {
    uint32_t N = phi.nvars();
    if (N > max_vars) throw std::invalid_argument("brute_force_unsat: too many variables");
    std::vector<bool> x(N);
    for (uint64_t mask = 0; mask < (uint64_t(1) << N); mask++) {
        for (uint32_t v = 0; v < N; v++) x[v] = (mask >> v) & 1;
        if (eval_formula(phi, x)) return false;
    }
    return true;
}

namespace {

// literals of the clause forbidding x_i = z, bits ascending
void append_not_equal(std::vector<Lit> &c, const BlockLayout &lay, uint32_t i, uint32_t z) {
    for (uint32_t j = 1; j <= lay.l; j++) {
        Lit v = Lit(lay.var(i, j) + 1);
        c.push_back(((z >> (j - 1)) & 1) ? -v : v);
    }
}

} // namespace

CnfFormula gen_bphp(uint32_t l, uint32_t m) { return gen_tbphp(l, m, 2); }

CnfFormula gen_tbphp(uint32_t l, uint32_t m, uint32_t t) {
    if (l == 0 || l > 20) throw std::invalid_argument("gen_tbphp: bad l");
    if (t < 2) throw std::invalid_argument("gen_tbphp: t below 2");
    uint32_t n = uint32_t(1) << l;
    if (m <= uint64_t(t - 1) * n) throw std::invalid_argument("gen_tbphp: m too small, formula satisfiable");
    CnfFormula phi(BlockLayout(m, l));
    std::vector<uint32_t> idx(t);
    for (uint32_t r = 0; r < t; r++) idx[r] = r + 1;
    while (true) {
        for (uint32_t z = 0; z < n; z++) {
            std::vector<Lit> c;
            for (uint32_t i : idx) append_not_equal(c, phi.lay, i, z);
            phi.add_clause(std::move(c));
        }
        int r = int(t) - 1;
        while (r >= 0 && idx[uint32_t(r)] == m - t + uint32_t(r) + 1) r--;
        if (r < 0) break;
        idx[uint32_t(r)]++;
        for (uint32_t u = uint32_t(r) + 1; u < t; u++) idx[u] = idx[u - 1] + 1;
    }
    return phi;
}

CnfFormula gen_fphp(uint32_t n, uint32_t m) {
    if (n == 0) throw std::invalid_argument("gen_fphp: no holes");
    if (m <= n) throw std::invalid_argument("gen_fphp: m too small, formula satisfiable");
    CnfFormula phi(BlockLayout(m, n));
    for (uint32_t i = 1; i <= m; i++) {
        std::vector<Lit> c;
        for (uint32_t j = 1; j <= n; j++) c.push_back(Lit(phi.lay.var(i, j) + 1));
        phi.add_clause(std::move(c));
    }
    for (uint32_t i = 1; i <= m; i++)
        for (uint32_t j1 = 1; j1 <= n; j1++)
            for (uint32_t j2 = j1 + 1; j2 <= n; j2++)
                phi.add_clause({-Lit(phi.lay.var(i, j1) + 1), -Lit(phi.lay.var(i, j2) + 1)});
    for (uint32_t j = 1; j <= n; j++)
        for (uint32_t i1 = 1; i1 <= m; i1++)
            for (uint32_t i2 = i1 + 1; i2 <= m; i2++)
                phi.add_clause({-Lit(phi.lay.var(i1, j) + 1), -Lit(phi.lay.var(i2, j) + 1)});
    return phi;
}

CnfFormula lift_block_indexing(const CnfFormula &phi) {
    uint32_t l = phi.lay.l;
    CnfFormula out(BlockLayout(phi.lay.m, 2 * l + 1));
    // lifted block i: variable 1 is s_i, then x^0_i[1..l], then x^1_i[1..l]
    auto sel = [&](uint32_t i) { return Lit(out.lay.var(i, 1) + 1); };
    auto xvar = [&](uint32_t i, uint32_t j, uint32_t side) {
        return Lit(out.lay.var(i, 1 + side * l + j) + 1);
    };
    for (const auto &c : phi.clauses) {
        std::vector<uint32_t> blocks;
        for (Lit t : c) {
            uint32_t b = phi.lay.block_of(uint32_t(t > 0 ? t : -t) - 1);
            if (std::find(blocks.begin(), blocks.end(), b) == blocks.end()) blocks.push_back(b);
        }
        std::sort(blocks.begin(), blocks.end());
        uint32_t bw = uint32_t(blocks.size());
        for (uint32_t eps = 0; eps < (uint32_t(1) << bw); eps++) {
            std::vector<Lit> lc;
            for (uint32_t t = 0; t < bw; t++) {
                uint32_t i = blocks[t];
                uint32_t side = (eps >> t) & 1;
                lc.push_back(side ? -sel(i) : sel(i));
                for (Lit lit : c) {
                    uint32_t v = uint32_t(lit > 0 ? lit : -lit) - 1;
                    if (phi.lay.block_of(v) != i) continue;
                    uint32_t j = phi.lay.coord_of(v);
                    lc.push_back(lit > 0 ? xvar(i, j, side) : -xvar(i, j, side));
                }
            }
            out.add_clause(std::move(lc));
        }
    }
    return out;
}

std::string to_dimacs(const CnfFormula &phi) {
    std::ostringstream os;
    os << "c blocks m=" << phi.lay.m << " l=" << phi.lay.l << '\n';
    os << "p cnf " << phi.nvars() << ' ' << phi.clauses.size() << '\n';
    for (const auto &c : phi.clauses) {
        for (Lit t : c) os << t << ' ';
        os << "0\n";
    }
    return os.str();
}

CnfFormula from_dimacs(const std::string &text) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string &msg) {
        throw std::invalid_argument("dimacs line " + std::to_string(lineno) + ": " + msg);
    };
    uint32_t m = 0, l = 0, nvars = 0;
    size_t nclauses = 0;
    bool have_p = false, have_blocks = false;
    CnfFormula phi;
    std::vector<Lit> cur;
    while (std::getline(is, line)) {
        lineno++;
        if (line.empty()) continue;
        if (line[0] == 'c') {
            unsigned cm = 0, cl = 0;
            if (sscanf(line.c_str(), "c blocks m=%u l=%u", &cm, &cl) == 2) {
                m = cm;
                l = cl;
                have_blocks = true;
            }
            continue;
        }
        if (line[0] == 'p') {
            if (have_p) fail("duplicate header");
            unsigned pv = 0;
            unsigned long pc = 0;
            if (sscanf(line.c_str(), "p cnf %u %lu", &pv, &pc) != 2) fail("bad header");
            nvars = pv;
            nclauses = pc;
            if (nvars == 0) fail("no variables");
            if (!have_blocks) {
                m = nvars;
                l = 1;
            }
            if (uint64_t(m) * l != nvars) fail("block layout does not match variable count");
            phi.lay = BlockLayout(m, l);
            have_p = true;
            continue;
        }
        if (!have_p) fail("clause before header");
        std::istringstream ls(line);
        long long t;
        while (ls >> t) {
            if (t == 0) {
                try {
                    phi.add_clause(cur);
                } catch (const std::invalid_argument &e) {
                    fail(e.what());
                }
                cur.clear();
            } else {
                if (t > nvars || t < -(long long)nvars) fail("literal out of range");
                cur.push_back(Lit(t));
            }
        }
        if (!ls.eof()) fail("bad token");
    }
    if (!have_p) fail("missing header");
    if (!cur.empty()) fail("unterminated clause");
    if (phi.clauses.size() != nclauses) fail("clause count does not match header");
    return phi;
}

} // namespace wb
