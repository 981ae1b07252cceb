#include "osd/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace osd {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), 0.0) {}

Tensor::Tensor(std::vector<int> s, double fill)
    : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), fill) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
        throw std::invalid_argument("Tensor: data size does not match shape " + shape_str(shape));
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : data) m = std::min(m, v);
    return m;
}

double Tensor::max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : data) m = std::max(m, v);
    return m;
}

double Tensor::sum() const {
    double s = 0;
    for (double v : data) s += v;
    return s;
}

double Tensor::mean() const { return data.empty() ? 0.0 : sum() / static_cast<double>(data.size()); }

Tensor Tensor::reshaped(std::vector<int> s) const {
    if (shape_numel(s) != size())
        throw std::invalid_argument("reshape: element count mismatch " + shape_str(shape) + " -> " + shape_str(s));
    Tensor out;
    out.shape = std::move(s);
    out.data = data;
    return out;
}

uint64_t tensor_hash(const Tensor& t) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (int d : t.shape) mix(&d, sizeof(d));
    if (!t.data.empty()) mix(t.data.data(), t.data.size() * sizeof(double));
    return h;
}

}  // namespace osd
