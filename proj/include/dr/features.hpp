#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dr/core.hpp"
#include "dr/perception.hpp"
#include "dr/raster.hpp"

namespace dr {

struct FeatureConfig {
    double rotation_threshold = 0.80;
    double dbscan_eps_fraction = 0.15;  // of the pooled bbox-area range
    int dbscan_min_pts = 1;
};

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

struct RotationSearchResult {
    int best_theta = 0;  // degrees, 0..359; lowest angle wins exact ties
    SimilarityScore best_score = -1.0;
    bool above_threshold = false;
};

/// The 360-image set R: element j is the reference rotated by j degrees;
/// element 0 is the reference itself, bit-exactly.
std::vector<RasterImage> build_rotation_set(const RasterImage& reference);

/// Precomputed orbit of one reference panel for repeated rotation queries.
/// Scores match similarity() on the rotated candidates.
class RotationOrbit {
public:
    explicit RotationOrbit(const RasterImage& reference);

    bool reference_blank() const { return blank_; }
    RotationSearchResult estimate(const RasterImage& query,
                                  double threshold) const;

private:
    int width_ = 0;
    int height_ = 0;
    bool blank_ = false;
    long long pixel_count_ = 0;
    std::size_t words_ = 0;
    std::vector<std::uint64_t> masks_;   // 360 packed ink bitmaps
    std::vector<long long> ink_counts_;  // per angle
};

RotationSearchResult estimate_rotation(const RasterImage& reference,
                                       const RasterImage& query,
                                       double threshold);

// ---------------------------------------------------------------------------
// DBSCAN
// ---------------------------------------------------------------------------

inline constexpr int kDbscanNoise = -1;

/// Standard density-reachability semantics over Euclidean points, closed
/// eps-ball. Deterministic given input order: clusters are seeded and
/// expanded in index order, so labels are 0..k-1 in discovery order.
std::vector<int> dbscan(const std::vector<std::vector<double>>& points,
                        double eps, int min_pts);

// 1-D convenience used by the scaling feature.
std::vector<int> dbscan(const std::vector<double>& points, double eps,
                        int min_pts);

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

/// Cluster pooled bbox areas and map the clusters, ascending by mean area,
/// onto the ordered label vocabulary (4 clusters anchor to Tiny/Small/Large/
/// VeryLarge, 1 cluster to Normal). Noise points take the nearest cluster
/// mean; all-noise degrades to Normal with *informative set to false. Panels
/// with no detections get an empty label list (Nil).
std::array<std::vector<SizeLabel>, kPanelCount> extract_scaling(
    const std::array<std::vector<DetectedShape>, kPanelCount>& shapes_per_panel,
    double eps, int min_pts, bool* informative = nullptr);

// ---------------------------------------------------------------------------
// Knowledge acquisition
// ---------------------------------------------------------------------------

/// Builds the knowledge base: detections on all 7 panels, rotation against
/// the panel-1 orbit (NA for every panel unless all 7 pass the threshold),
/// counts, and size labels. Perception failures degrade to NA features.
KnowledgeBase acquire_knowledge(const ProblemSpace& p, const FeatureConfig& cfg);

// Variant over bare panels (no labels attached), for solver paths.
KnowledgeBase acquire_knowledge(const std::array<RasterImage, kPanelCount>& panels,
                                const FeatureConfig& cfg);

}  // namespace dr
