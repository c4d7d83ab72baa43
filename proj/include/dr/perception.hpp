#pragma once

#include <map>
#include <utility>
#include <vector>

#include "dr/core.hpp"

namespace dr {

// Maximal 8-connected ink region. Labels are 1..N, assigned in row-major
// first-encounter order.
struct ComponentMask {
    int label = 0;
    std::vector<std::pair<int, int>> pixels;  // ink pixels (x, y)
    BBox bbox;
    long long area = 0;      // ink pixel count
    double perimeter = 0.0;  // outer silhouette contour length
    int hole_count = 0;      // enclosed background regions
};

std::vector<ComponentMask> connected_components(const RasterImage& img);

/// One DetectedShape per ink component. Kind comes from contour analysis
/// (dominant-point polygon approximation + circularity); fill from ink
/// coverage of the convex hull. Components that fit no template cleanly get
/// a best guess with confidence < 0.5 — never a hard failure.
std::vector<DetectedShape> detect_shapes(const RasterImage& img);

std::map<ShapeKind, int> count_by_kind(const std::vector<DetectedShape>& shapes);

}  // namespace dr
