#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace osd {

// Dense row-major tensor of doubles. Shapes are small (desk scale), so
// everything lives in a flat std::vector.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, double fill);
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    double& at(int i) { return data[static_cast<size_t>(i)]; }
    double at(int i) const { return data[static_cast<size_t>(i)]; }
    // 2-D accessors (row-major)
    double& at(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }
    // 3-D accessors [C,H,W]
    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    double min() const;
    double max() const;
    double sum() const;
    double mean() const;

    Tensor reshaped(std::vector<int> s) const;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// FNV-1a over the raw bytes; used for freeze/leakage checks.
uint64_t tensor_hash(const Tensor& t);

}  // namespace osd
