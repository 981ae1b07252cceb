#include "osd/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace osd {

int64_t Rng::below(int64_t n) {
    if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
    // rejection sampling for an unbiased draw
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

Tensor Rng::normal_tensor(std::vector<int> shape, double mean, double stddev) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = mean + stddev * normal();
    return t;
}

Tensor Rng::uniform_tensor(std::vector<int> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = uniform(lo, hi);
    return t;
}

Rng Rng::derive(uint64_t base_seed, uint64_t index) {
    // splitmix64 over (base, index) so per-item streams are independent
    uint64_t z = base_seed + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z = z ^ (z >> 31);
    return Rng(z);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << gen_ << " " << (have_spare_ ? 1 : 0) << " ";
    os.precision(17);
    os << spare_;
    return os.str();
}

void Rng::deserialize(const std::string& s) {
    std::istringstream is(s);
    int spare_flag = 0;
    is >> gen_ >> spare_flag >> spare_;
    if (is.fail()) throw std::runtime_error("Rng::deserialize: malformed state string");
    have_spare_ = spare_flag != 0;
}

}  // namespace osd
