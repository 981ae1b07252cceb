#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "osd/tensor.hpp"

namespace osd {

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// uniform/normal mappings here are hand-rolled so streams are identical
// on every platform (std::*_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    int64_t below(int64_t n);

    // standard normal via Box-Muller (both values used, deterministic order)
    double normal();

    Tensor normal_tensor(std::vector<int> shape, double mean = 0.0, double stddev = 1.0);
    Tensor uniform_tensor(std::vector<int> shape, double lo, double hi);

    // fork a stream for sub-task `index` without disturbing this stream
    static Rng derive(uint64_t base_seed, uint64_t index);

    std::string serialize() const;
    void deserialize(const std::string& s);

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace osd
