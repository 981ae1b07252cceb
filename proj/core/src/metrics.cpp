#include "osd/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "osd/features.hpp"
#include "osd/image_io.hpp"
#include "osd/losses.hpp"

namespace fs = std::filesystem;

namespace osd {

void FeatureSampleSet::validate() const {
    if (features.rank() != 2 || features.dim(0) < 2)
        throw std::invalid_argument("FeatureSampleSet: need an [n,m] matrix with n >= 2");
    if (!features.all_finite()) throw std::invalid_argument("FeatureSampleSet: non-finite features");
}

namespace {

using EMat = Eigen::MatrixXd;
using EVec = Eigen::VectorXd;

void moments(const FeatureSampleSet& s, EVec& mu, EMat& cov) {
    const int n = s.n(), m = s.m();
    EMat X(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) X(i, j) = s.features.at(i, j);
    mu = X.colwise().mean();
    EMat centered = X.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / static_cast<double>(n - 1);
}

}  // namespace

double frechet_distance(const FeatureSampleSet& a, const FeatureSampleSet& b) {
    a.validate();
    b.validate();
    if (a.m() != b.m()) throw std::invalid_argument("frechet_distance: feature dimensions differ");
    EVec mu_a, mu_b;
    EMat cov_a, cov_b;
    moments(a, mu_a, cov_a);
    moments(b, mu_b, cov_b);
    if (!cov_a.allFinite() || !cov_b.allFinite()) throw std::invalid_argument("frechet_distance: non-finite covariance");

    EMat prod = cov_a * cov_b;
    EMat sym = 0.5 * (prod + prod.transpose());
    Eigen::SelfAdjointEigenSolver<EMat> es(sym);
    double tr_sqrt = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()[i]));

    const double mean_term = (mu_a - mu_b).squaredNorm();
    return mean_term + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
}

double identity_angle(const std::vector<double>& ea, const std::vector<double>& eb) {
    if (ea.size() != eb.size() || ea.empty()) throw std::invalid_argument("identity_angle: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < ea.size(); ++i) {
        dot += ea[i] * eb[i];
        na += ea[i] * ea[i];
        nb += eb[i] * eb[i];
    }
    if (na <= 0 || nb <= 0) throw std::invalid_argument("identity_angle: zero vector");
    double c = dot / std::sqrt(na * nb);
    c = c < -1.0 ? -1.0 : (c > 1.0 ? 1.0 : c);
    return std::acos(c) * 180.0 / M_PI;
}

double landmark_distance(const LandmarkSet& a, const LandmarkSet& b) {
    if (a.points.size() != b.points.size()) throw std::invalid_argument("landmark_distance: point count mismatch");
    if (a.points.empty()) throw std::invalid_argument("landmark_distance: empty landmark sets");
    double s = 0;
    for (size_t i = 0; i < a.points.size(); ++i) {
        const double dx = a.points[i].first - b.points[i].first;
        const double dy = a.points[i].second - b.points[i].second;
        s += std::sqrt(dx * dx + dy * dy);
    }
    return s / static_cast<double>(a.points.size());
}

LandmarkSet read_landmarks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_landmarks: cannot open " + path);
    LandmarkSet out;
    double x, y;
    while (in >> x >> y) out.points.emplace_back(x, y);
    return out;
}

void write_landmarks(const std::string& path, const LandmarkSet& lms) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_landmarks: cannot open " + path);
    out.precision(17);
    for (auto& [x, y] : lms.points) out << x << " " << y << "\n";
}

EvalReport evaluate_suite(const std::string& restored_dir, const std::string& reference_dir, const EvalConfig& cfg) {
    EvalReport report;
    auto restored = list_images(restored_dir);
    auto reference = list_images(reference_dir);
    if (restored.empty()) throw std::runtime_error("evaluate_suite: no images in " + restored_dir);
    if (reference.empty()) throw std::runtime_error("evaluate_suite: no images in " + reference_dir);

    ParamStore ps;
    SeededPyramidExtractor feat(ps, "fx", cfg.feature_seed);
    FaceEmbedder face(ps, "face", 128, cfg.feature_seed + 1);

    // paired subset: same basename on both sides
    std::vector<std::string> paired;
    for (auto& name : restored) {
        if (fs::exists(fs::path(reference_dir) / name)) paired.push_back(name);
        else report.pairing_failures.push_back(name + ": no reference counterpart");
    }

    for (const auto& metric : cfg.metrics) {
        if (metric == "dists" || metric == "deg" || metric == "lmd") {
            double acc = 0;
            int n = 0;
            for (auto& name : paired) {
                const std::string rp = (fs::path(restored_dir) / name).string();
                const std::string fp = (fs::path(reference_dir) / name).string();
                if (metric == "lmd") {
                    const std::string rl = rp.substr(0, rp.size() - 4) + ".landmarks.txt";
                    const std::string fl = fp.substr(0, fp.size() - 4) + ".landmarks.txt";
                    if (!fs::exists(rl) || !fs::exists(fl)) {
                        report.pairing_failures.push_back(name + ": missing landmark sidecar");
                        continue;
                    }
                    acc += landmark_distance(read_landmarks(rl), read_landmarks(fl));
                    ++n;
                    continue;
                }
                Tensor ir = load_image(rp);
                Tensor if_ = load_image(fp);
                if (ir.shape != if_.shape) {
                    report.pairing_failures.push_back(name + ": size mismatch");
                    continue;
                }
                if (metric == "dists") {
                    acc += dists(ir, if_, feat, ps);
                } else {
                    Tensor er = face.embed(ps, ir), ef = face.embed(ps, if_);
                    acc += identity_angle(std::vector<double>(er.data.begin(), er.data.end()),
                                          std::vector<double>(ef.data.begin(), ef.data.end()));
                }
                ++n;
            }
            report.entries.push_back({metric, n > 0 ? acc / n : 0.0, n});
        } else if (metric == "fid") {
            auto features_of = [&](const std::string& dir, const std::vector<std::string>& names) {
                Tensor f({static_cast<int>(names.size()), feat.pooled_dim()});
                for (size_t i = 0; i < names.size(); ++i) {
                    Tensor p = feat.pooled(ps, load_image((fs::path(dir) / names[i]).string()));
                    for (int j = 0; j < feat.pooled_dim(); ++j) f.at(static_cast<int>(i), j) = p.data[static_cast<size_t>(j)];
                }
                return f;
            };
            FeatureSampleSet A{features_of(restored_dir, restored), restored_dir};
            FeatureSampleSet B{features_of(reference_dir, reference), reference_dir};
            report.entries.push_back({metric, frechet_distance(A, B), static_cast<int>(restored.size())});
        } else {
            throw std::invalid_argument("evaluate_suite: unknown metric '" + metric +
                                        "' (valid: dists, deg, lmd, fid)");
        }
    }
    return report;
}

}  // namespace osd
