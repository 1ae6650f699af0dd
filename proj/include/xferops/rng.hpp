#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>

namespace xferops {

// Counter-based generator: every draw is a pure hash of (seed, stream, counter),
// so substreams can be split across workers and a run is reproducible from the
// seed recorded in its outputs.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), counter_(0) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    CounterRng split(std::uint64_t substream) const {
        return CounterRng(seed_, mix_(stream_ ^ (0x9e3779b97f4a7c15ULL + substream)));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (counter_++ + 1);
        z ^= mix_(stream_);
        return mix_(z);
    }

    // uniform in [0,1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [a,b)
    double uniform(double a, double b) { return a + (b - a) * next_double(); }

    // index in [0,n)
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(next_double() * static_cast<double>(n)) % n;
    }

private:
    static std::uint64_t mix_(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
};

// Seed precedence: XFEROPS_SEED env var > explicit value.
inline std::uint64_t resolve_seed(std::uint64_t fallback) {
    if (const char* env = std::getenv("XFEROPS_SEED")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && end != env) return static_cast<std::uint64_t>(v);
    }
    return fallback;
}

} // namespace xferops
