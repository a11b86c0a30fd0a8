#pragma once

#include "wb/rat.hh"

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace wb {

// One stochastic choice: index pick below support, taken with exact weight.
struct TapeEvent {
    std::string what;
    uint32_t support = 0;
    uint32_t pick = 0;
    Rat weight;
};

// Source of stochastic choices. Weights must be nonnegative rationals summing
// to one; every consumed choice is recorded, so a run can be replayed through
// FixedTape or audited event by event.
struct RandomTape {
    std::vector<TapeEvent> events;

    virtual ~RandomTape() = default;
    uint32_t choose(const std::string &what, const std::vector<Rat> &weights);
    // probability of this exact event sequence
    Rat weight() const;

  protected:
    virtual uint32_t pick(const std::vector<Rat> &weights) = 0;
};

// Draws with exact cumulative weights from a seeded generator.
struct SeededTape final : RandomTape {
    explicit SeededTape(uint64_t seed) : rng(seed) {}
    std::mt19937_64 rng;

  protected:
    uint32_t pick(const std::vector<Rat> &weights) override;
};

// Replays an explicit pick sequence.
struct FixedTape final : RandomTape {
    explicit FixedTape(std::vector<uint32_t> picks) : picks(std::move(picks)) {}
    std::vector<uint32_t> picks;
    size_t next = 0;

  protected:
    uint32_t pick(const std::vector<Rat> &weights) override;
};

struct TapeCapExceeded : std::runtime_error {
    uint64_t branches;
    explicit TapeCapExceeded(uint64_t branches)
        : std::runtime_error("tape enumeration passed " + std::to_string(branches) +
                             " branches, over the configured cap"),
          branches(branches) {}
};

inline constexpr uint64_t kDefaultBranchCap = 10000000;

// Runs the procedure once per complete choice sequence, depth first, calling
// done with the finished tape after each run. The tape's weight is the branch
// probability; weights over all branches sum to one.
void for_each_tape(const std::function<void(RandomTape &)> &run,
                   const std::function<void(const RandomTape &)> &done,
                   uint64_t branch_cap = kDefaultBranchCap);

// (leaf, failed) of one simulation run.
using SimOutcome = std::pair<int, bool>;

// Exact outcome distribution by exhaustive tape enumeration.
std::map<SimOutcome, Rat> exact_outcome_distribution(
    const std::function<SimOutcome(RandomTape &)> &run,
    uint64_t branch_cap = kDefaultBranchCap);

uint64_t splitmix64(uint64_t x);

struct McReport {
    uint64_t trials = 0;
    uint64_t successes = 0;
    uint64_t violations = 0;
    double estimate = 0;
    double lo = 0, hi = 0; // Wilson score interval
};

// Independent seeded trials; the trial functor returns success. Invariant
// violations are counted and never scored as successes. Trial i runs on a
// tape seeded with splitmix64(seed + i), so reports do not depend on
// scheduling.
McReport monte_carlo(const std::function<bool(RandomTape &)> &trial, uint64_t trials,
                     uint64_t seed, double z = 1.96);

} // namespace wb
