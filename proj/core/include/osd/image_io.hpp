#pragma once

#include <string>
#include <vector>

#include "osd/tensor.hpp"

namespace osd {

// 8-bit PNG in, [3,H,W] doubles in [0,1] out
Tensor load_image(const std::string& path);
void save_image(const std::string& path, const Tensor& image);

// single-channel map, min/max normalized before writing
void save_grayscale(const std::string& path, const Tensor& map2d);

// rows x cols composition with optional per-column header labels
Tensor compose_grid(const std::vector<std::vector<Tensor>>& rows, const std::vector<std::string>& col_labels);

std::vector<std::string> list_images(const std::string& dir);  // sorted .png basenames

}  // namespace osd
