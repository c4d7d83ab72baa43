#pragma once

#include <string>
#include <vector>

#include "dr/core.hpp"

namespace dr {

// Normalized cross-correlation on binarized, mean-centered panels, in [-1,1].
using SimilarityScore = double;

// Throws StructuralError when a scene invariant is violated (panel too small,
// primitive out of bounds or overlapping).
void validate_scene(const Scene& scene);

/// Deterministic rasterization: white background (255), black ink (0).
/// Polygon vertices are placed at their exact rotated positions and rounded
/// half-away-from-zero onto the pixel grid; circles use the exact center and
/// radius. Identical scenes always produce identical pixels.
RasterImage rasterize(const Scene& scene);

/// Rotate about the panel center, positive angles turning the content the
/// same way as a scene's rotation_deg. Bilinear resampling, background fill
/// 255. Multiples of 90 degrees are exact pixel permutations (theta = 0 is
/// the identity bit-exactly).
RasterImage rotate_image(const RasterImage& img, double theta_deg);

/// NCC over mean-centered binarized pixels. Defined edge cases:
/// blank-vs-blank = 1.0, blank-vs-nonblank = 0.0, equal-after-binarize = 1.0.
/// Throws StructuralError on dimension mismatch.
SimilarityScore similarity(const RasterImage& a, const RasterImage& b);

// Same score from precomputed ink counts of two binarized masks.
SimilarityScore binary_ncc(long long ink_a, long long ink_b, long long overlap,
                           long long n);

// Number of pixels that binarize to ink.
long long ink_count(const RasterImage& img);

// --- binary PGM (P5, maxval 255): the bit-exact on-disk panel format ---

std::string encode_pgm(const RasterImage& img);
RasterImage decode_pgm(const std::string& bytes);
void write_pgm(const RasterImage& img, const std::string& path);
RasterImage read_pgm(const std::string& path);

/// Mean-pool to grid_w x grid_h, intensities scaled to [0,1] (background 1).
std::vector<double> mean_pool(const RasterImage& img, int grid_w, int grid_h);

// Continuous-space vertices of a primitive's polygon outline, after rotation,
// rounded half-away-from-zero. Circles have no vertices (empty result).
struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};
std::vector<Vec2> polygon_vertices(const Primitive& prim, int width, int height);

}  // namespace dr
