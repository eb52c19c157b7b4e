#pragma once

#include <cstdint>
#include <random>

namespace fbent {

// Seeded generator with platform-independent variates. The standard library
// distributions are implementation-defined, so everything here is built on raw
// mt19937_64 output to keep streams bit-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t substream = 0);

    std::uint64_t next_u64() { return engine_(); }
    double uniform();                                  // [0, 1)
    double uniform_open();                             // (0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t below(std::uint64_t n);              // [0, n), unbiased
    bool bernoulli(double p) { return uniform() < p; }
    double normal();                                   // N(0, 1)
    double exponential(double rate);
    double laplace(double scale);
    std::uint64_t poisson(double mean);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace fbent
