#include "wb/gadget.hh"

#include <stdexcept>

namespace wb {

namespace {

void add_mass(std::map<uint32_t, Rat> &m, uint32_t u, const Rat &w) {
    auto it = m.find(u);
    if (it == m.end())
        m.emplace(u, w);
    else
        it->second += w;
}

Rat mass_of(const std::map<uint32_t, Rat> &m, uint32_t u) {
    auto it = m.find(u);
    return it == m.end() ? Rat(0) : it->second;
}

} // namespace

Gadget gadget_bind(uint32_t l) {
    if (l == 0 || l > 8) throw std::invalid_argument("gadget_bind: bad l");
    Gadget g;
    g.name = "bIND_" + std::to_string(l);
    g.arity = 2 * l + 1;
    g.out_bits = l;
    uint32_t mask = (uint32_t(1) << l) - 1;
    g.table.resize(g.inputs());
    for (uint32_t u = 0; u < g.inputs(); u++) {
        uint32_t s = u & 1;
        g.table[u] = (u >> (1 + s * l)) & mask;
    }
    auto pack = [&](uint32_t s, uint32_t x0, uint32_t x1) {
        return s | (x0 << 1) | (x1 << (l + 1));
    };
    g.stifle.resize(size_t(g.outputs()) * g.arity);
    for (uint32_t y = 0; y <= mask; y++) {
        for (uint32_t j = 0; j < g.arity; j++) {
            uint32_t u;
            if (j == 0)
                u = pack(0, y, y);
            else if (j <= l)
                u = pack(1, y, y) & ~(uint32_t(1) << j);
            else
                u = pack(0, y, y) & ~(uint32_t(1) << j);
            g.stifle[size_t(y) * g.arity + j] = u;
        }
    }

    g.delta = rat(1, 3);
    Rat third = rat(1, 3);
    Rat half = rat(1, 2);
    Rat unif_l = Rat(1) / Rat(long(1) << l);
    g.mu.resize(g.outputs());
    g.part_a.resize(size_t(g.outputs()) * g.arity);
    g.part_b.resize(size_t(g.outputs()) * g.arity);
    for (uint32_t y = 0; y <= mask; y++) {
        auto &mu = g.mu[y];
        for (uint32_t s = 0; s < 2; s++) add_mass(mu, pack(s, y, y), third * half);
        for (uint32_t w = 0; w <= mask; w++) {
            add_mass(mu, pack(0, y, w), third * unif_l);
            add_mass(mu, pack(1, w, y), third * unif_l);
        }
        for (uint32_t j = 0; j < g.arity; j++) {
            auto &a = g.part_a[size_t(y) * g.arity + j];
            auto &b = g.part_b[size_t(y) * g.arity + j];
            if (j == 0) {
                // the uniform-selector part peels off; A mixes the two
                // fixed-selector parts
                for (uint32_t w = 0; w <= mask; w++) {
                    add_mass(a, pack(0, y, w), half * unif_l);
                    add_mass(a, pack(1, w, y), half * unif_l);
                }
                add_mass(b, pack(0, y, y), Rat(1));
            } else if (j <= l) {
                // bit j lives in x^0; the s=1 part has it uniform
                for (uint32_t s = 0; s < 2; s++) add_mass(a, pack(s, y, y), half * half);
                for (uint32_t w = 0; w <= mask; w++) add_mass(a, pack(0, y, w), half * unif_l);
                for (uint32_t w = 0; w <= mask; w++) {
                    uint32_t u = pack(1, w, y) & ~(uint32_t(1) << j);
                    add_mass(b, u, unif_l);
                }
            } else {
                for (uint32_t s = 0; s < 2; s++) add_mass(a, pack(s, y, y), half * half);
                for (uint32_t w = 0; w <= mask; w++) add_mass(a, pack(1, w, y), half * unif_l);
                for (uint32_t w = 0; w <= mask; w++) {
                    uint32_t u = pack(0, y, w) & ~(uint32_t(1) << j);
                    add_mass(b, u, unif_l);
                }
            }
        }
    }
    return g;
}

void balanced_from_stifling(Gadget &g) {
    if (g.stifle.size() != size_t(g.outputs()) * g.arity)
        throw std::invalid_argument("balanced_from_stifling: witness table incomplete");
    g.delta = Rat(1) / Rat(long(g.arity));
    Rat half = rat(1, 2);
    Rat pick = Rat(1) / Rat(long(g.arity));
    g.mu.assign(g.outputs(), {});
    g.part_a.assign(size_t(g.outputs()) * g.arity, {});
    g.part_b.assign(size_t(g.outputs()) * g.arity, {});
    for (uint32_t y = 0; y < g.outputs(); y++) {
        for (uint32_t jp = 0; jp < g.arity; jp++) {
            uint32_t w = g.stifle[size_t(y) * g.arity + jp];
            for (uint32_t bit = 0; bit < 2; bit++)
                add_mass(g.mu[y], w | (bit << jp), pick * half);
        }
        for (uint32_t j = 0; j < g.arity; j++) {
            auto &a = g.part_a[size_t(y) * g.arity + j];
            auto &b = g.part_b[size_t(y) * g.arity + j];
            Rat cond = Rat(1) / Rat(long(g.arity) - 1);
            for (uint32_t jp = 0; jp < g.arity; jp++) {
                uint32_t w = g.stifle[size_t(y) * g.arity + jp];
                if (jp == j) {
                    add_mass(b, w, Rat(1));
                } else {
                    for (uint32_t bit = 0; bit < 2; bit++)
                        add_mass(a, w | (bit << jp), cond * half);
                }
            }
        }
    }
}

Gadget gadget_maj3() {
    Gadget g;
    g.name = "MAJ3";
    g.arity = 3;
    g.out_bits = 1;
    g.table.resize(8);
    for (uint32_t u = 0; u < 8; u++)
        g.table[u] = __builtin_popcount(u) >= 2;
    g.stifle.resize(6);
    for (uint32_t y = 0; y < 2; y++)
        for (uint32_t j = 0; j < 3; j++)
            g.stifle[y * 3 + j] = y ? (7u & ~(1u << j)) : 0u;
    balanced_from_stifling(g);
    return g;
}

Gadget gadget_ind12() {
    Gadget g;
    g.name = "IND_1+2";
    g.arity = 3;
    g.out_bits = 1;
    // bit 0 selects, bit 1 is x_0, bit 2 is x_1
    g.table.resize(8);
    for (uint32_t u = 0; u < 8; u++)
        g.table[u] = (u >> (1 + (u & 1))) & 1;
    g.stifle.resize(6);
    for (uint32_t y = 0; y < 2; y++) {
        g.stifle[y * 3 + 0] = (y << 1) | (y << 2);
        g.stifle[y * 3 + 1] = 1u | (y << 2);
        g.stifle[y * 3 + 2] = 0u | (y << 1);
    }
    balanced_from_stifling(g);
    return g;
}

Gadget gadget_ip22() {
    Gadget g;
    g.name = "IP_2+2";
    g.arity = 4;
    g.out_bits = 1;
    // bits (0,1) against bits (2,3)
    g.table.resize(16);
    for (uint32_t u = 0; u < 16; u++)
        g.table[u] = ((u & 1) & ((u >> 2) & 1)) ^ (((u >> 1) & 1) & ((u >> 3) & 1));
    g.stifle.resize(8);
    for (uint32_t y = 0; y < 2; y++) {
        // zero the partner of the free position, realize y on the other pair
        g.stifle[y * 4 + 0] = y ? (2u | 8u) : 0u;  // b1=0, a2=b2=y
        g.stifle[y * 4 + 1] = y ? (1u | 4u) : 0u;  // b2=0, a1=b1=y
        g.stifle[y * 4 + 2] = y ? (2u | 8u) : 0u;  // a1=0, a2=b2=y
        g.stifle[y * 4 + 3] = y ? (1u | 4u) : 0u;  // a2=0, a1=b1=y
    }
    balanced_from_stifling(g);
    return g;
}

std::vector<Gadget> gadget_catalog(uint32_t bind_l) {
    return {gadget_bind(bind_l), gadget_maj3(), gadget_ind12(), gadget_ip22()};
}

void verify_gadget(const Gadget &g) {
    auto fail = [&](const std::string &msg) {
        throw std::logic_error("gadget " + g.name + ": " + msg);
    };
    if (g.arity == 0 || g.out_bits == 0) fail("degenerate shape");
    if (g.table.size() != g.inputs()) fail("truth table size");
    for (uint32_t u = 0; u < g.inputs(); u++)
        if (g.table[u] >= g.outputs()) fail("truth table value out of range");
    if (g.stifle.size() != size_t(g.outputs()) * g.arity) fail("witness table size");
    for (uint32_t y = 0; y < g.outputs(); y++)
        for (uint32_t j = 0; j < g.arity; j++) {
            uint32_t w = g.stifle[size_t(y) * g.arity + j];
            if (w >= g.inputs() || ((w >> j) & 1)) fail("witness not canonical");
            if (g.eval(w) != y || g.eval(w | (1u << j)) != y) fail("witness does not stifle");
        }
    if (!(g.delta > 0 && g.delta < 1)) fail("delta out of range");
    if (g.mu.size() != g.outputs()) fail("mu size");
    if (g.part_a.size() != size_t(g.outputs()) * g.arity) fail("A size");
    if (g.part_b.size() != size_t(g.outputs()) * g.arity) fail("B size");
    auto check_dist = [&](const std::map<uint32_t, Rat> &d, const std::string &what) {
        Rat total = 0;
        for (const auto &[u, w] : d) {
            if (u >= g.inputs()) fail(what + " mass off the cube");
            if (w < 0) fail(what + " negative mass");
            total += w;
        }
        if (total != 1) fail(what + " total mass " + rat_str(total));
    };
    Rat half = rat(1, 2);
    for (uint32_t y = 0; y < g.outputs(); y++) {
        check_dist(g.mu[y], "mu");
        for (const auto &[u, w] : g.mu[y])
            if (w > 0 && g.eval(u) != y) fail("mu mass outside the fiber");
        for (uint32_t j = 0; j < g.arity; j++) {
            const auto &a = g.part_a[size_t(y) * g.arity + j];
            const auto &b = g.part_b[size_t(y) * g.arity + j];
            check_dist(a, "A");
            check_dist(b, "B");
            for (const auto &[u, w] : b)
                if ((u >> j) & 1) fail("B mass with the mixed bit set");
            for (uint32_t u = 0; u < g.inputs(); u++) {
                Rat lhs = mass_of(g.mu[y], u);
                Rat rhs = (Rat(1) - g.delta) * mass_of(a, u) +
                          g.delta * half * mass_of(b, u & ~(1u << j));
                if (lhs != rhs) fail("mixture identity broken");
            }
        }
    }
}

CnfFormula compose_gadget(const CnfFormula &phi, const Gadget &g) {
    if (g.out_bits != 1) throw std::invalid_argument("compose_gadget: gadget must have one output");
    CnfFormula out(BlockLayout(phi.nvars(), g.arity));
    // preimages of 0 and 1 in ascending input order
    std::vector<std::vector<uint32_t>> pre(2);
    for (uint32_t u = 0; u < g.inputs(); u++) pre[g.eval(u)].push_back(u);
    for (const auto &c : phi.clauses) {
        if (c.empty()) {
            out.add_clause({});
            continue;
        }
        bool expandable = true;
        for (Lit t : c)
            if (pre[t > 0 ? 0 : 1].empty()) expandable = false;
        if (!expandable) continue;
        std::vector<size_t> pick(c.size(), 0);
        while (true) {
            std::vector<Lit> lc;
            for (size_t t = 0; t < c.size(); t++) {
                uint32_t v = uint32_t(c[t] > 0 ? c[t] : -c[t]);
                uint32_t falsify = c[t] > 0 ? 0 : 1;
                uint32_t u = pre[falsify][pick[t]];
                // forbid block v from taking value u
                for (uint32_t j = 1; j <= g.arity; j++) {
                    Lit x = Lit(out.lay.var(v, j) + 1);
                    lc.push_back(((u >> (j - 1)) & 1) ? -x : x);
                }
            }
            out.add_clause(std::move(lc));
            size_t t = c.size();
            while (t > 0) {
                t--;
                uint32_t falsify = c[t] > 0 ? 0 : 1;
                if (++pick[t] < pre[falsify].size()) break;
                pick[t] = 0;
                if (t == 0) {
                    t = SIZE_MAX;
                    break;
                }
            }
            if (t == SIZE_MAX) break;
        }
    }
    return out;
}

} // namespace wb
