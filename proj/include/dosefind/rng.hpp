#pragma once

// Reproducible random streams.
//
// Every random task (one scenario draw, one trial replication) owns a
// std::mt19937_64 whose state is derived from a tuple of 64-bit words
// (master seed, purpose tag, id...) through std::seed_seq. Both the engine and
// seed_seq are bit-specified by the standard, so a (seed, ids) tuple yields the
// same stream on every platform and independently of how tasks are scheduled
// over threads. Uniform variates are built from the raw engine output; the
// std:: distributions are avoided because their algorithms are unspecified.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include <boost/random/gamma_distribution.hpp>

namespace dosefind {

/// Purpose tags keep streams used for different jobs disjoint even when the
/// numeric ids coincide.
enum class StreamTag : std::uint64_t {
    Scenario = 0x5343454e,      // "SCEN"
    Replication = 0x5245504c,   // "REPL"
    Counterexample = 0x43545258,  // "CTRX"
    Session = 0x53455353,       // "SESS"
};

/// Collapses (master, tag, ids...) into a single 64-bit trial seed. The result
/// is what a TrialTrace records, so a trace can be replayed from it alone.
inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::initializer_list<std::uint64_t> ids) {
    std::vector<std::uint32_t> words;
    words.reserve(4 + 2 * ids.size());
    auto push = [&](std::uint64_t w) {
        words.push_back(static_cast<std::uint32_t>(w));
        words.push_back(static_cast<std::uint32_t>(w >> 32));
    };
    push(master);
    push(static_cast<std::uint64_t>(tag));
    for (auto id : ids) push(id);
    std::seed_seq seq(words.begin(), words.end());
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
        engine_.seed(seq);
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// One engine draw per call. prob = 0 never fires, prob = 1 always does.
    bool bernoulli(double prob) { return uniform() < prob; }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

    /// Dirichlet(alpha) via normalized gamma variates.
    std::vector<double> dirichlet(std::span<const double> alpha) {
        std::vector<double> w(alpha.size());
        double total = 0.0;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
            boost::random::gamma_distribution<double> gamma(alpha[j], 1.0);
            w[j] = gamma(*this);
            total += w[j];
        }
        for (auto& x : w) x /= total;
        return w;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace dosefind
