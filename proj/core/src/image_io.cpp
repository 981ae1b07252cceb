#include "osd/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <filesystem>
#include <stdexcept>

namespace fs = std::filesystem;

namespace osd {

Tensor load_image(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
    if (m.empty()) throw std::runtime_error("load_image: cannot read " + path);
    Tensor out({3, m.rows, m.cols});
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            const auto& px = m.at<cv::Vec3b>(y, x);  // BGR
            out.at(0, y, x) = px[2] / 255.0;
            out.at(1, y, x) = px[1] / 255.0;
            out.at(2, y, x) = px[0] / 255.0;
        }
    return out;
}

void save_image(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("save_image: expected [3,H,W]");
    const int H = image.dim(1), W = image.dim(2);
    cv::Mat m(H, W, CV_8UC3);
    auto to8 = [](double v) {
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        return static_cast<unsigned char>(std::lround(v * 255.0));
    };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            m.at<cv::Vec3b>(y, x) = cv::Vec3b(to8(image.at(2, y, x)), to8(image.at(1, y, x)), to8(image.at(0, y, x)));
    if (!cv::imwrite(path, m)) throw std::runtime_error("save_image: cannot write " + path);
}

void save_grayscale(const std::string& path, const Tensor& map2d) {
    if (map2d.rank() != 2) throw std::invalid_argument("save_grayscale: expected [H,W]");
    const double lo = map2d.min(), hi = map2d.max();
    const double span = (hi - lo) > 1e-12 ? (hi - lo) : 1.0;
    cv::Mat m(map2d.dim(0), map2d.dim(1), CV_8UC1);
    for (int y = 0; y < map2d.dim(0); ++y)
        for (int x = 0; x < map2d.dim(1); ++x)
            m.at<unsigned char>(y, x) = static_cast<unsigned char>(std::lround((map2d.at(y, x) - lo) / span * 255.0));
    if (!cv::imwrite(path, m)) throw std::runtime_error("save_grayscale: cannot write " + path);
}

Tensor compose_grid(const std::vector<std::vector<Tensor>>& rows, const std::vector<std::string>& col_labels) {
    if (rows.empty() || rows[0].empty()) throw std::invalid_argument("compose_grid: empty input");
    const int cell_h = rows[0][0].dim(1), cell_w = rows[0][0].dim(2);
    const size_t ncols = rows[0].size();
    for (auto& r : rows) {
        if (r.size() != ncols) throw std::invalid_argument("compose_grid: ragged rows");
        for (auto& im : r)
            if (im.dim(1) != cell_h || im.dim(2) != cell_w)
                throw std::invalid_argument("compose_grid: cells must share one size");
    }
    const int header = col_labels.empty() ? 0 : 12;
    const int H = header + static_cast<int>(rows.size()) * cell_h;
    const int W = static_cast<int>(ncols) * cell_w;
    cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < ncols; ++c) {
            const Tensor& im = rows[r][c];
            for (int y = 0; y < cell_h; ++y)
                for (int x = 0; x < cell_w; ++x) {
                    auto to8 = [](double v) {
                        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                        return static_cast<unsigned char>(std::lround(v * 255.0));
                    };
                    canvas.at<cv::Vec3b>(header + static_cast<int>(r) * cell_h + y, static_cast<int>(c) * cell_w + x) =
                        cv::Vec3b(to8(im.at(2, y, x)), to8(im.at(1, y, x)), to8(im.at(0, y, x)));
                }
        }
    for (size_t c = 0; c < col_labels.size() && c < ncols; ++c)
        cv::putText(canvas, col_labels[c], cv::Point(static_cast<int>(c) * cell_w + 2, header - 3),
                    cv::FONT_HERSHEY_PLAIN, 0.7, cv::Scalar(0, 0, 0), 1);
    Tensor out({3, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const auto& px = canvas.at<cv::Vec3b>(y, x);
            out.at(0, y, x) = px[2] / 255.0;
            out.at(1, y, x) = px[1] / 255.0;
            out.at(2, y, x) = px[0] / 255.0;
        }
    return out;
}

std::vector<std::string> list_images(const std::string& dir) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace osd
