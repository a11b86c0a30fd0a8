#include "wb/f2.hh"

#include <algorithm>
#include <bit>
#include <sstream>

namespace wb {

int F2Vec::lowest() const {
    for (size_t k = 0; k < w.size(); k++)
        if (w[k]) return int(k * 64 + std::countr_zero(w[k]));
    return -1;
}

int F2Vec::popcount() const {
    int c = 0;
    for (uint64_t x : w) c += std::popcount(x);
    return c;
}

std::vector<uint32_t> F2Vec::ones() const {
    std::vector<uint32_t> out;
    for (size_t k = 0; k < w.size(); k++) {
        uint64_t x = w[k];
        while (x) {
            out.push_back(uint32_t(k * 64 + std::countr_zero(x)));
            x &= x - 1;
        }
    }
    return out;
}

bool F2Vec::dot(const F2Vec &o) const {
    uint64_t acc = 0;
    for (size_t k = 0; k < w.size(); k++) acc ^= w[k] & o.w[k];
    return std::popcount(acc) & 1;
}

bool F2Vec::operator<(const F2Vec &o) const {
    for (size_t k = 0; k < w.size(); k++) {
        if (w[k] == o.w[k]) continue;
        uint64_t diff = w[k] ^ o.w[k];
        uint64_t low = diff & (~diff + 1);
        return (w[k] & low) == 0;
    }
    return false;
}

LinSys row_reduce(const LinSys &sys) {
    // pivot index -> row, kept fully back-eliminated at all times
    std::vector<std::pair<int, Parity>> rows;
    for (const Parity &e0 : sys.eqs) {
        Parity e = e0;
        for (const auto &[p, r] : rows)
            if (e.form.get(uint32_t(p))) {
                e.form ^= r.form;
                e.constant ^= r.constant;
            }
        int p = e.form.lowest();
        if (p < 0) {
            if (e.constant) return contradiction(sys.n);
            continue;
        }
        for (auto &[q, r] : rows)
            if (r.form.get(uint32_t(p))) {
                r.form ^= e.form;
                r.constant ^= e.constant;
            }
        rows.emplace_back(p, std::move(e));
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto &a, const auto &b) { return a.first < b.first; });
    LinSys out(sys.n);
    for (auto &[p, r] : rows) out.add(std::move(r));
    return out;
}

bool is_inconsistent(const LinSys &reduced) {
    return reduced.eqs.size() == 1 && reduced.eqs[0].form.is_zero() &&
           reduced.eqs[0].constant;
}

uint32_t rank_of(const LinSys &sys) {
    LinSys r = row_reduce(sys);
    if (is_inconsistent(r)) throw std::logic_error("rank_of: inconsistent system");
    return uint32_t(r.eqs.size());
}

bool implies_eq(const LinSys &a_reduced, const Parity &e) {
    if (is_inconsistent(a_reduced)) return true;
    Parity r = e;
    for (const Parity &row : a_reduced.eqs) {
        int p = row.form.lowest();
        if (p >= 0 && r.form.get(uint32_t(p))) {
            r.form ^= row.form;
            r.constant ^= row.constant;
        }
    }
    return r.form.is_zero() && !r.constant;
}

bool implies(const LinSys &a, const LinSys &b) {
    LinSys ar = row_reduce(a);
    if (is_inconsistent(ar)) return true;
    for (const Parity &e : b.eqs)
        if (!implies_eq(ar, e)) return false;
    return true;
}

LinSys union_sys(const LinSys &a, const LinSys &b) {
    LinSys out = a;
    for (const Parity &e : b.eqs) out.add(e);
    return out;
}

void AffRestr::fix(uint32_t v, Parity value) {
    if (v >= n) throw std::out_of_range("AffRestr::fix: variable out of range");
    if (value.form.get(v)) throw std::invalid_argument("AffRestr::fix: self-reference");
    for (const auto &[u, val] : fixed) {
        if (value.form.get(u))
            throw std::invalid_argument("AffRestr::fix: value references a fixed variable");
        if (val.form.get(v))
            throw std::invalid_argument("AffRestr::fix: variable appears in an existing value");
    }
    fixed[v] = std::move(value);
}

void AffRestr::fix_const(uint32_t v, bool value) { fix(v, Parity(F2Vec(n), value)); }

F2Vec AffRestr::extend(const F2Vec &free_part) const {
    F2Vec x = free_part;
    for (const auto &[v, val] : fixed) x.set(v, false);
    for (const auto &[v, val] : fixed) x.set(v, val.eval(x));
    return x;
}

LinSys AffRestr::graph_system() const {
    LinSys s(n);
    for (const auto &[v, val] : fixed) {
        Parity e(val.form, val.constant);
        e.form.flip(v);
        s.add(e);
    }
    return s;
}

Parity substitute(const Parity &eq, const AffRestr &rho) {
    if (eq.form.n != rho.n) throw std::invalid_argument("substitute: length mismatch");
    Parity out = eq;
    for (const auto &[v, val] : rho.fixed) {
        if (!out.form.get(v)) continue;
        out.form.flip(v);
        out.form ^= val.form;
        out.constant ^= val.constant;
    }
    return out;
}

LinSys substitute(const LinSys &sys, const AffRestr &rho) {
    LinSys out(sys.n);
    for (const Parity &e : sys.eqs) out.add(substitute(e, rho));
    return row_reduce(out);
}

AffRestr compose(const AffRestr &rho, const AffRestr &sigma) {
    AffRestr out(rho.n);
    for (const auto &[v, val] : rho.fixed) {
        // rewrite rho's values through sigma so they mention only final free vars
        out.fixed[v] = substitute(val, sigma);
        if (out.fixed[v].form.get(v))
            throw std::invalid_argument("compose: circular fixing");
    }
    for (const auto &[v, val] : sigma.fixed) {
        if (out.fixed.count(v)) throw std::invalid_argument("compose: variable fixed twice");
        out.fixed[v] = val;
    }
    return out;
}

void for_each_solution(const LinSys &sys, uint32_t cap,
                       const std::function<void(const F2Vec &)> &fn) {
    LinSys r = row_reduce(sys);
    if (is_inconsistent(r)) return;
    std::vector<bool> is_pivot(sys.n, false);
    for (const Parity &e : r.eqs) is_pivot[uint32_t(e.form.lowest())] = true;
    std::vector<uint32_t> free_vars;
    for (uint32_t v = 0; v < sys.n; v++)
        if (!is_pivot[v]) free_vars.push_back(v);
    if (free_vars.size() > cap) throw EnumCapExceeded(free_vars.size());

    uint64_t total = uint64_t(1) << free_vars.size();
    for (uint64_t a = 0; a < total; a++) {
        F2Vec x(sys.n);
        for (size_t k = 0; k < free_vars.size(); k++)
            if ((a >> k) & 1) x.set(free_vars[k], true);
        for (const Parity &e : r.eqs) {
            uint32_t p = uint32_t(e.form.lowest());
            // pivot occurs only in its own row, so solve directly
            bool v = e.constant ^ e.form.dot(x);
            x.set(p, v ^ x.get(p));
        }
        fn(x);
    }
}

std::vector<F2Vec> enumerate_solutions(const LinSys &sys, uint32_t cap) {
    std::vector<F2Vec> out;
    for_each_solution(sys, cap, [&](const F2Vec &x) { out.push_back(x); });
    return out;
}

std::string format_parity(const Parity &e) {
    std::ostringstream os;
    bool first = true;
    for (uint32_t v : e.form.ones()) {
        if (!first) os << ' ';
        os << 'v' << (v + 1);
        first = false;
    }
    if (first) os << '0';
    os << " = " << (e.constant ? '1' : '0');
    return os.str();
}

Parity parse_parity(const std::string &line, uint32_t n) {
    std::string body = line;
    if (auto h = body.find('#'); h != std::string::npos) body.resize(h);
    std::istringstream is(body);
    Parity e{F2Vec(n), false};
    std::string tok;
    bool seen_eq = false, seen_rhs = false, seen_lhs = false;
    while (is >> tok) {
        if (tok == "=") {
            if (seen_eq) throw std::invalid_argument("parse_parity: duplicate '='");
            seen_eq = true;
        } else if (!seen_eq) {
            seen_lhs = true;
            if (tok == "0") continue;
            if (tok.size() < 2 || tok[0] != 'v')
                throw std::invalid_argument("parse_parity: bad token '" + tok + "'");
            unsigned long v = std::stoul(tok.substr(1));
            if (v < 1 || v > n)
                throw std::invalid_argument("parse_parity: variable out of range in '" + tok + "'");
            e.form.flip(uint32_t(v - 1));
        } else {
            if (seen_rhs || (tok != "0" && tok != "1"))
                throw std::invalid_argument("parse_parity: bad rhs '" + tok + "'");
            e.constant = tok == "1";
            seen_rhs = true;
        }
    }
    if (!seen_lhs || !seen_eq || !seen_rhs)
        throw std::invalid_argument("parse_parity: incomplete equation '" + line + "'");
    return e;
}

std::string format_system(const LinSys &sys) {
    std::ostringstream os;
    for (const Parity &e : sys.eqs) os << format_parity(e) << '\n';
    return os.str();
}

LinSys parse_system(const std::string &text, uint32_t n) {
    LinSys sys(n);
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::string body = line;
        if (auto h = body.find('#'); h != std::string::npos) body.resize(h);
        if (body.find_first_not_of(" \t\r") == std::string::npos) continue;
        sys.add(parse_parity(body, n));
    }
    return sys;
}

} // namespace wb
