#include "wb/tape.hh"

#include <cmath>

namespace wb {

uint32_t RandomTape::choose(const std::string &what, const std::vector<Rat> &weights) {
    if (weights.empty()) throw std::invalid_argument("choose needs a nonempty support");
    Rat total = 0;
    for (const Rat &w : weights) {
        if (w < 0) throw std::invalid_argument("negative weight in " + what);
        total += w;
    }
    if (total != 1) throw std::invalid_argument("weights of " + what + " sum to " + rat_str(total));
    uint32_t p = pick(weights);
    if (p >= weights.size() || weights[p] == 0)
        throw std::logic_error("tape picked outside the support of " + what);
    events.push_back({what, uint32_t(weights.size()), p, weights[p]});
    return p;
}

Rat RandomTape::weight() const {
    Rat w = 1;
    for (const TapeEvent &e : events) w *= e.weight;
    return w;
}

uint32_t SeededTape::pick(const std::vector<Rat> &weights) {
    // scale to integers over a common denominator and draw a uniform integer
    mpz_class den = 1;
    for (const Rat &w : weights) mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), w.get_den_mpz_t());
    std::vector<mpz_class> scaled(weights.size());
    for (size_t i = 0; i < weights.size(); i++)
        scaled[i] = mpz_class(weights[i].get_num() * (den / weights[i].get_den()));

    size_t bits = mpz_sizeinbase(den.get_mpz_t(), 2);
    mpz_class draw;
    do {
        draw = 0;
        for (size_t got = 0; got < bits; got += 64) {
            draw <<= 64;
            draw += mpz_class(rng());
        }
        size_t extra = ((bits + 63) / 64) * 64 - bits;
        draw >>= extra;
    } while (draw >= den);

    for (size_t i = 0; i < weights.size(); i++) {
        if (draw < scaled[i]) return uint32_t(i);
        draw -= scaled[i];
    }
    throw std::logic_error("weights did not cover the drawn value");
}

uint32_t FixedTape::pick(const std::vector<Rat> &weights) {
    (void)weights;
    if (next >= picks.size()) throw std::out_of_range("fixed tape ran out of picks");
    return picks[next++];
}

namespace {

// Replays a forced prefix, then takes the first positive-weight pick at every
// fresh event while remembering the full weight lists for the odometer.
struct EnumTape final : RandomTape {
    std::vector<uint32_t> prefix;
    std::vector<std::vector<Rat>> weight_lists;

  protected:
    uint32_t pick(const std::vector<Rat> &weights) override {
        weight_lists.push_back(weights);
        size_t at = weight_lists.size() - 1;
        if (at < prefix.size()) return prefix[at];
        for (size_t i = 0; i < weights.size(); i++)
            if (weights[i] > 0) return uint32_t(i);
        throw std::logic_error("all weights are zero");
    }
};

} // namespace

void for_each_tape(const std::function<void(RandomTape &)> &run,
                   const std::function<void(const RandomTape &)> &done,
                   uint64_t branch_cap) {
    std::vector<uint32_t> prefix;
    uint64_t branches = 0;
    for (;;) {
        if (++branches > branch_cap) throw TapeCapExceeded(branches);
        EnumTape tape;
        tape.prefix = prefix;
        run(tape);
        done(tape);

        // advance the deepest event that still has a heavier sibling
        bool advanced = false;
        for (size_t at = tape.events.size(); at-- > 0;) {
            const std::vector<Rat> &w = tape.weight_lists[at];
            for (uint32_t j = tape.events[at].pick + 1; j < w.size(); j++) {
                if (w[j] > 0) {
                    prefix.clear();
                    for (size_t k = 0; k < at; k++) prefix.push_back(tape.events[k].pick);
                    prefix.push_back(j);
                    advanced = true;
                    break;
                }
            }
            if (advanced) break;
        }
        if (!advanced) return;
    }
}

std::map<SimOutcome, Rat> exact_outcome_distribution(
    const std::function<SimOutcome(RandomTape &)> &run, uint64_t branch_cap) {
    std::map<SimOutcome, Rat> dist;
    SimOutcome last;
    for_each_tape([&](RandomTape &t) { last = run(t); },
                  [&](const RandomTape &t) { dist[last] += t.weight(); }, branch_cap);
    return dist;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

McReport monte_carlo(const std::function<bool(RandomTape &)> &trial, uint64_t trials,
                     uint64_t seed, double z) {
    McReport rep;
    rep.trials = trials;
    for (uint64_t i = 0; i < trials; i++) {
        SeededTape tape(splitmix64(seed + i));
        try {
            if (trial(tape)) rep.successes++;
        } catch (const std::logic_error &) {
            rep.violations++;
        }
    }
    if (trials == 0) {
        rep.hi = 1;
        return rep;
    }
    double n = double(trials);
    double p = double(rep.successes) / n;
    rep.estimate = p;
    double z2 = z * z;
    double center = (p + z2 / (2 * n)) / (1 + z2 / n);
    double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    rep.lo = std::max(0.0, center - half);
    rep.hi = std::min(1.0, center + half);
    return rep;
}

} // namespace wb
