#pragma once

#include "osd/metrics.hpp"
#include "osd/rng.hpp"
#include "osd/tensor.hpp"

namespace osd {

// Seeded parametric face-like image: gradient background, elliptical head,
// eyes, eyebrows and mouth, with per-sample jitter. Landmarks are the two
// eye centers, mouth center and mouth corners.
struct ProceduralFace {
    Tensor image;        // [3,S,S]
    LandmarkSet landmarks;
};

ProceduralFace make_face(uint64_t seed, int size = 64);

std::vector<ProceduralFace> make_face_dataset(uint64_t base_seed, int count, int size = 64);

}  // namespace osd
