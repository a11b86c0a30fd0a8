#include "wb/dag.hh"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace wb {

uint32_t AffineDag::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> memo(nodes.size(), -1);
    std::function<int(int)> go = [&](int v) -> int {
        int &d = memo[size_t(v)];
        if (d >= 0) return d;
        const Node &nd = nodes[size_t(v)];
        if (nd.sink) return d = 0;
        return d = 1 + std::max(go(nd.child[0]), go(nd.child[1]));
    };
    return uint32_t(go(0));
}

int AffineDag::run(const F2Vec &x) const {
    int v = 0;
    while (!nodes[size_t(v)].sink) {
        const Node &nd = nodes[size_t(v)];
        v = nd.child[nd.query.eval(x) ? 1 : 0];
    }
    return v;
}

DagReport verify_affine_dag(const AffineDag &d, const SearchProblem &r, uint32_t cap) {
    DagReport rep;
    auto fail = [&](int where, const std::string &msg) {
        rep.ok = false;
        rep.where = where;
        rep.error = msg;
        return rep;
    };
    if (d.nodes.empty()) return fail(-1, "empty graph");
    if (d.nvars != r.lay.nvars()) return fail(-1, "variable count does not match the problem");
    size_t N = d.nodes.size();
    std::vector<uint32_t> indeg(N, 0);
    for (size_t v = 0; v < N; v++) {
        const auto &nd = d.nodes[v];
        if (nd.sys.n != d.nvars) return fail(int(v), "system on the wrong variable count");
        if (nd.sink) continue;
        if (nd.query.form.n != d.nvars) return fail(int(v), "query on the wrong variable count");
        for (int b = 0; b < 2; b++) {
            if (nd.child[b] < 0 || size_t(nd.child[b]) >= N)
                return fail(int(v), "edge to a missing node");
            indeg[size_t(nd.child[b])]++;
        }
    }
    for (size_t v = 1; v < N; v++)
        if (indeg[v] == 0) return fail(int(v), "second source");
    if (indeg[0] != 0) return fail(0, "root has an incoming edge");
    if (!d.nodes[0].sys.eqs.empty()) return fail(0, "root system not empty");

    // acyclicity by coloring
    std::vector<uint8_t> color(N, 0);
    std::function<bool(size_t)> acyclic = [&](size_t v) {
        if (color[v] == 1) return false;
        if (color[v] == 2) return true;
        color[v] = 1;
        if (!d.nodes[v].sink)
            for (int b = 0; b < 2; b++)
                if (!acyclic(size_t(d.nodes[v].child[b]))) return false;
        color[v] = 2;
        return true;
    };
    if (!acyclic(0)) return fail(0, "cycle reachable from the root");

    for (size_t v = 0; v < N; v++) {
        const auto &nd = d.nodes[v];
        if (nd.sink) continue;
        for (int b = 0; b < 2; b++) {
            LinSys premise = nd.sys;
            premise.add(outcome_equation(nd.query, b != 0));
            if (!implies(premise, d.nodes[size_t(nd.child[b])].sys))
                return fail(int(v), "edge " + std::to_string(v) + " -> " +
                                        std::to_string(nd.child[b]) + " (branch " +
                                        std::to_string(b) + ") does not imply the child system");
        }
    }

    for (size_t v = 0; v < N; v++) {
        const auto &nd = d.nodes[v];
        if (!nd.sink) continue;
        LinSys red = row_reduce(nd.sys);
        if (is_inconsistent(red)) {
            rep.warnings.push_back("sink " + std::to_string(v) +
                                   " has an inconsistent system (dead code)");
            continue;
        }
        bool bad = false;
        F2Vec witness;
        try {
            for_each_solution(nd.sys, cap, [&](const F2Vec &x) {
                if (!bad && !r.member_vec(x, nd.label)) {
                    bad = true;
                    witness = x;
                }
            });
        } catch (const EnumCapExceeded &e) {
            return fail(int(v), "sink " + std::to_string(v) + ": " + e.what());
        }
        if (bad) {
            rep.countermodel = witness;
            return fail(int(v), "sink " + std::to_string(v) + " mislabels a solution");
        }
    }
    return rep;
}

AffineDag apply_restriction(const AffineDag &d, const AffRestr &rho, const BlockLayout &lay) {
    if (!block_respecting(rho, lay))
        throw std::invalid_argument("apply_restriction: restriction not block-respecting");
    AffineDag out;
    out.nvars = d.nvars;
    out.nodes.reserve(d.nodes.size());
    for (const auto &nd : d.nodes) {
        AffineDag::Node e;
        e.sys = substitute(nd.sys, rho);
        e.sink = nd.sink;
        e.label = nd.label;
        if (!nd.sink) {
            e.query = substitute(nd.query, rho);
            e.child[0] = nd.child[0];
            e.child[1] = nd.child[1];
        }
        out.nodes.push_back(std::move(e));
    }
    return out;
}

Pdt truncate_to_pdt(const AffineDag &d, int v, uint32_t depth) {
    Pdt t;
    t.nvars = d.nvars;
    std::function<int(int, uint32_t)> build = [&](int u, uint32_t rem) -> int {
        int idx = int(t.nodes.size());
        t.nodes.emplace_back();
        const auto &nd = d.nodes[size_t(u)];
        if (nd.sink) {
            t.nodes[size_t(idx)].leaf = true;
            t.nodes[size_t(idx)].label = nd.label;
            t.nodes[size_t(idx)].dag_node = u;
            return idx;
        }
        if (rem == 0) {
            t.nodes[size_t(idx)].leaf = true;
            t.nodes[size_t(idx)].abort = true;
            t.nodes[size_t(idx)].dag_node = u;
            return idx;
        }
        t.nodes[size_t(idx)].query = nd.query;
        t.nodes[size_t(idx)].dag_node = u;
        int c0 = build(nd.child[0], rem - 1);
        int c1 = build(nd.child[1], rem - 1);
        t.nodes[size_t(idx)].child[0] = c0;
        t.nodes[size_t(idx)].child[1] = c1;
        return idx;
    };
    build(v, depth);
    return t;
}

LinSys path_system(const AffineDag &d, int u, const std::vector<bool> &branch) {
    LinSys psi(d.nvars);
    int v = u;
    for (bool b : branch) {
        const auto &nd = d.nodes[size_t(v)];
        if (nd.sink) throw std::invalid_argument("path_system: path runs past a sink");
        psi.add(outcome_equation(nd.query, b));
        v = nd.child[b ? 1 : 0];
    }
    return psi;
}

bool check_path_implication(const AffineDag &d, int u, const std::vector<bool> &branch) {
    LinSys psi = path_system(d, u, branch);
    int v = u;
    for (bool b : branch) v = d.nodes[size_t(v)].child[b ? 1 : 0];
    return implies(union_sys(d.nodes[size_t(u)].sys, psi), d.nodes[size_t(v)].sys);
}

AffineDag pdt_to_treelike_dag(const Pdt &t, const SearchProblem &r) {
    BlockVals counter;
    if (!pdt_solves(t, r, &counter)) {
        std::string msg = "pdt_to_treelike_dag: tree does not solve the problem on input (";
        for (size_t i = 0; i < counter.size(); i++)
            msg += (i ? "," : "") + std::to_string(counter[i]);
        throw std::invalid_argument(msg + ")");
    }
    AffineDag d;
    d.nvars = t.nvars;
    d.nodes.resize(t.nodes.size());
    std::function<void(int, const LinSys &)> build = [&](int v, const LinSys &sys) {
        const Pdt::Node &tn = t.nodes[size_t(v)];
        auto &dn = d.nodes[size_t(v)];
        dn.sys = row_reduce(sys);
        if (tn.leaf) {
            dn.sink = true;
            if (!tn.abort) {
                dn.label = tn.label;
            } else {
                if (r.outputs.empty())
                    throw std::invalid_argument("pdt_to_treelike_dag: no label for a dead leaf");
                dn.label = r.outputs.front();
            }
            return;
        }
        dn.query = tn.query;
        dn.child[0] = tn.child[0];
        dn.child[1] = tn.child[1];
        for (int b = 0; b < 2; b++) {
            LinSys next = sys;
            next.add(outcome_equation(tn.query, b != 0));
            build(tn.child[b], next);
        }
    };
    build(0, LinSys(t.nvars));
    return d;
}

namespace {

std::string format_label(const Output &o) {
    std::string s;
    for (size_t i = 0; i < o.size(); i++) s += (i ? "," : "") + std::to_string(o[i]);
    return s;
}

std::string format_eqs(const LinSys &sys) {
    std::string s;
    for (size_t i = 0; i < sys.eqs.size(); i++)
        s += (i ? "; " : "") + format_parity(sys.eqs[i]);
    return s;
}

} // namespace

std::string format_dag(const AffineDag &d, const BlockLayout &lay) {
    if (lay.nvars() != d.nvars)
        throw std::invalid_argument("format_dag: layout does not match variable count");
    std::ostringstream os;
    os << "blocks m=" << lay.m << " l=" << lay.l << '\n';
    for (size_t v = 0; v < d.nodes.size(); v++) {
        const auto &nd = d.nodes[v];
        os << "node " << v;
        if (nd.sink) os << " sink " << format_label(nd.label);
        os << " system:";
        std::string eqs = format_eqs(nd.sys);
        if (!eqs.empty()) os << ' ' << eqs;
        os << '\n';
    }
    for (size_t v = 0; v < d.nodes.size(); v++) {
        const auto &nd = d.nodes[v];
        if (nd.sink) continue;
        for (int b = 0; b < 2; b++)
            os << "edge " << v << ' ' << nd.child[b] << ' '
               << format_parity(outcome_equation(nd.query, b != 0)) << '\n';
    }
    return os.str();
}

AffineDag parse_dag(const std::string &text, BlockLayout *lay_out) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string &msg) {
        throw std::invalid_argument("dag line " + std::to_string(lineno) + ": " + msg);
    };
    bool have_header = false;
    BlockLayout lay(1, 1);
    uint32_t nvars = 0;

    struct RawEdge {
        uint32_t from, to;
        Parity eq;
    };
    std::map<uint32_t, AffineDag::Node> nodes;
    std::vector<RawEdge> edges;

    while (std::getline(is, line)) {
        lineno++;
        std::string body = line;
        if (auto h = body.find('#'); h != std::string::npos) body.resize(h);
        if (body.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!have_header) {
            unsigned m = 0, l = 0;
            if (sscanf(body.c_str(), "blocks m=%u l=%u", &m, &l) != 2 || !m || !l)
                fail("expected 'blocks m=<m> l=<l>'");
            lay = BlockLayout(m, l);
            nvars = lay.nvars();
            have_header = true;
            continue;
        }
        std::istringstream ls(body);
        std::string kind;
        ls >> kind;
        if (kind == "node") {
            uint32_t id;
            if (!(ls >> id)) fail("node id expected");
            if (nodes.count(id)) fail("duplicate node id");
            AffineDag::Node nd;
            std::string tok;
            if (!(ls >> tok)) fail("expected 'sink' or 'system:'");
            if (tok == "sink") {
                nd.sink = true;
                std::string lab;
                if (!(ls >> lab)) fail("sink label expected");
                std::istringstream labs(lab);
                std::string part;
                while (std::getline(labs, part, ',')) {
                    try {
                        nd.label.push_back(uint32_t(std::stoul(part)));
                    } catch (...) {
                        fail("bad sink label '" + lab + "'");
                    }
                }
                if (!(ls >> tok)) fail("expected 'system:'");
            }
            if (tok != "system:") fail("expected 'system:', got '" + tok + "'");
            std::string rest;
            std::getline(ls, rest);
            nd.sys = LinSys(nvars);
            std::istringstream parts(rest);
            std::string eq;
            while (std::getline(parts, eq, ';')) {
                if (eq.find_first_not_of(" \t") == std::string::npos) continue;
                try {
                    nd.sys.add(parse_parity(eq, nvars));
                } catch (const std::exception &e) {
                    fail(e.what());
                }
            }
            nodes.emplace(id, std::move(nd));
        } else if (kind == "edge") {
            uint32_t from, to;
            if (!(ls >> from >> to)) fail("edge endpoints expected");
            std::string rest;
            std::getline(ls, rest);
            try {
                edges.push_back({from, to, parse_parity(rest, nvars)});
            } catch (const std::exception &e) {
                fail(e.what());
            }
        } else {
            fail("unknown directive '" + kind + "'");
        }
    }
    lineno = 0;
    if (!have_header) fail("missing header");
    if (nodes.empty()) fail("no nodes");

    std::map<uint32_t, std::vector<RawEdge>> out_edges;
    std::map<uint32_t, uint32_t> indeg;
    for (const RawEdge &e : edges) {
        if (!nodes.count(e.from) || !nodes.count(e.to))
            fail("edge mentions unknown node " +
                 std::to_string(nodes.count(e.from) ? e.to : e.from));
        out_edges[e.from].push_back(e);
        indeg[e.to]++;
    }
    uint32_t root = 0;
    bool root_found = false;
    for (const auto &[id, nd] : nodes)
        if (!indeg.count(id)) {
            if (root_found) fail("two source nodes: " + std::to_string(root) + " and " +
                                 std::to_string(id));
            root = id;
            root_found = true;
        }
    if (!root_found) fail("no source node");

    // dense ids, root first, the rest in ascending id order
    std::map<uint32_t, int> dense;
    dense[root] = 0;
    for (const auto &[id, nd] : nodes)
        if (id != root) dense[id] = int(dense.size());
    AffineDag d;
    d.nvars = nvars;
    d.nodes.resize(nodes.size());
    for (auto &[id, nd] : nodes) {
        int at = dense[id];
        auto it = out_edges.find(id);
        size_t deg = it == out_edges.end() ? 0 : it->second.size();
        if (nd.sink) {
            if (deg != 0) fail("sink " + std::to_string(id) + " has outgoing edges");
        } else {
            if (deg != 2) fail("internal node " + std::to_string(id) + " needs exactly 2 edges");
            const RawEdge &a = it->second[0], &b = it->second[1];
            if (!(a.eq.form == b.eq.form) || a.eq.constant == b.eq.constant)
                fail("edges of node " + std::to_string(id) +
                     " must share a form with outcomes 0 and 1");
            nd.query = Parity(a.eq.form, false);
            nd.child[a.eq.constant ? 1 : 0] = dense[a.to];
            nd.child[b.eq.constant ? 1 : 0] = dense[b.to];
        }
        d.nodes[size_t(at)] = std::move(nd);
    }
    if (lay_out) *lay_out = lay;
    return d;
}

} // namespace wb
