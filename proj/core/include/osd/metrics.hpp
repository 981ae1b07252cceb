#pragma once

#include <string>
#include <vector>

#include "osd/tensor.hpp"

namespace osd {

// n x m feature matrix; n >= 2 so the covariance is estimable.
struct FeatureSampleSet {
    Tensor features;  // [n, m]
    std::string source;

    int n() const { return features.dim(0); }
    int m() const { return features.dim(1); }
    void validate() const;
};

struct LandmarkSet {
    std::vector<std::pair<double, double>> points;
};

// ||mu_A - mu_B||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}); the matrix square
// root comes from the eigendecomposition of the symmetrized product with
// negative eigenvalues clipped at zero.
double frechet_distance(const FeatureSampleSet& a, const FeatureSampleSet& b);

// arccos of the clamped dot product, in degrees
double identity_angle(const std::vector<double>& ea, const std::vector<double>& eb);

// mean Euclidean distance over corresponding points
double landmark_distance(const LandmarkSet& a, const LandmarkSet& b);

struct MetricEntry {
    std::string name;
    double value = 0.0;
    int n = 0;
};

struct EvalConfig {
    std::vector<std::string> metrics{"dists", "deg", "lmd", "fid"};
    uint64_t feature_seed = 7;
};

struct EvalReport {
    std::vector<MetricEntry> entries;
    std::vector<std::string> pairing_failures;
};

// Directory-level battery. Paired metrics require filename correspondence
// between restored and reference; FID is set-level.
EvalReport evaluate_suite(const std::string& restored_dir, const std::string& reference_dir, const EvalConfig& cfg);

// landmark sidecar I/O: one "x y" pair per line
LandmarkSet read_landmarks(const std::string& path);
void write_landmarks(const std::string& path, const LandmarkSet& lms);

}  // namespace osd
