#include "dr/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>

namespace dr {

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

std::vector<RasterImage> build_rotation_set(const RasterImage& reference) {
    std::vector<RasterImage> set;
    set.reserve(360);
    for (int j = 0; j < 360; ++j)
        set.push_back(rotate_image(reference, static_cast<double>(j)));
    return set;
}

namespace {

void pack_ink(const RasterImage& img, std::uint64_t* words, std::size_t word_count) {
    std::fill(words, words + word_count, 0);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        if (img.pixels[i] < 128) words[i >> 6] |= 1ULL << (i & 63);
}

}  // namespace

RotationOrbit::RotationOrbit(const RasterImage& reference) {
    width_ = reference.width;
    height_ = reference.height;
    blank_ = reference.blank();
    pixel_count_ = static_cast<long long>(reference.pixels.size());
    words_ = (reference.pixels.size() + 63) / 64;
    masks_.resize(words_ * 360);
    ink_counts_.resize(360);
    for (int j = 0; j < 360; ++j) {
        RasterImage rotated = rotate_image(reference, static_cast<double>(j));
        std::uint64_t* words = masks_.data() + words_ * j;
        pack_ink(rotated, words, words_);
        long long ink = 0;
        for (std::size_t w = 0; w < words_; ++w)
            ink += std::popcount(words[w]);
        ink_counts_[j] = ink;
    }
}

RotationSearchResult RotationOrbit::estimate(const RasterImage& query,
                                             double threshold) const {
    if (query.width != width_ || query.height != height_)
        throw StructuralError("estimate_rotation: dimension mismatch");
    std::vector<std::uint64_t> qwords(words_);
    pack_ink(query, qwords.data(), words_);
    long long qink = 0;
    for (std::uint64_t w : qwords) qink += std::popcount(w);

    RotationSearchResult result;
    result.best_score = -2.0;
    for (int j = 0; j < 360; ++j) {
        const std::uint64_t* words = masks_.data() + words_ * j;
        long long overlap = 0;
        for (std::size_t w = 0; w < words_; ++w)
            overlap += std::popcount(words[w] & qwords[w]);
        double score = binary_ncc(ink_counts_[j], qink, overlap, pixel_count_);
        if (score > result.best_score) {
            result.best_score = score;
            result.best_theta = j;
        }
    }
    result.above_threshold = result.best_score >= threshold;
    return result;
}

RotationSearchResult estimate_rotation(const RasterImage& reference,
                                       const RasterImage& query,
                                       double threshold) {
    return RotationOrbit(reference).estimate(query, threshold);
}

// ---------------------------------------------------------------------------
// DBSCAN
// ---------------------------------------------------------------------------

namespace {

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

std::vector<int> dbscan(const std::vector<std::vector<double>>& points,
                        double eps, int min_pts) {
    if (eps <= 0.0) throw StructuralError("dbscan: eps must be positive");
    if (min_pts < 1) throw StructuralError("dbscan: min_pts must be >= 1");
    const int n = static_cast<int>(points.size());
    if (n == 0) return {};
    for (const auto& p : points)
        if (p.size() != points[0].size())
            throw StructuralError("dbscan: mixed point dimensions");

    const double eps2 = eps * eps;
    constexpr int kUndef = -2;
    std::vector<int> labels(static_cast<std::size_t>(n), kUndef);

    auto region_query = [&](int i) {
        std::vector<int> out;
        for (int j = 0; j < n; ++j)
            if (sq_distance(points[static_cast<std::size_t>(i)],
                            points[static_cast<std::size_t>(j)]) <= eps2)
                out.push_back(j);
        return out;
    };

    int next_cluster = 0;
    for (int i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] != kUndef) continue;
        std::vector<int> nb = region_query(i);
        if (static_cast<int>(nb.size()) < min_pts) {
            labels[static_cast<std::size_t>(i)] = kDbscanNoise;
            continue;
        }
        const int cid = next_cluster++;
        labels[static_cast<std::size_t>(i)] = cid;
        std::deque<int> seeds(nb.begin(), nb.end());
        while (!seeds.empty()) {
            int j = seeds.front();
            seeds.pop_front();
            int& lj = labels[static_cast<std::size_t>(j)];
            if (lj == kDbscanNoise) {
                lj = cid;  // border point, not expanded
                continue;
            }
            if (lj != kUndef) continue;
            lj = cid;
            std::vector<int> nb2 = region_query(j);
            if (static_cast<int>(nb2.size()) >= min_pts)
                seeds.insert(seeds.end(), nb2.begin(), nb2.end());
        }
    }
    return labels;
}

std::vector<int> dbscan(const std::vector<double>& points, double eps,
                        int min_pts) {
    std::vector<std::vector<double>> wrapped;
    wrapped.reserve(points.size());
    for (double v : points) wrapped.push_back({v});
    return dbscan(wrapped, eps, min_pts);
}

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

namespace {

// Ascending cluster rank -> label. Single cluster reads Normal; a 4-ladder
// anchors to {Tiny, Small, Large, VeryLarge}; other counts spread evenly
// over the Tiny..VeryLarge span.
SizeLabel rank_label(int rank, int cluster_count) {
    if (cluster_count <= 1) return SizeLabel::Normal;
    double pos = 1.0 + 4.0 * rank / (cluster_count - 1);
    int ordinal = static_cast<int>(std::lround(pos));
    ordinal = std::clamp(ordinal, 1, kSizeLabelCount - 1);
    return static_cast<SizeLabel>(ordinal);
}

}  // namespace

std::array<std::vector<SizeLabel>, kPanelCount> extract_scaling(
    const std::array<std::vector<DetectedShape>, kPanelCount>& shapes_per_panel,
    double eps, int min_pts, bool* informative) {
    std::array<std::vector<SizeLabel>, kPanelCount> sigma;
    if (informative) *informative = true;

    std::vector<double> areas;                     // pooled feature points
    std::vector<std::pair<int, int>> owner;        // (panel, ordinal)
    for (int panel = 0; panel < kPanelCount; ++panel) {
        for (std::size_t k = 0; k < shapes_per_panel[panel].size(); ++k) {
            areas.push_back(static_cast<double>(
                shapes_per_panel[panel][k].bbox.area()));
            owner.push_back({panel, static_cast<int>(k)});
        }
        sigma[panel].resize(shapes_per_panel[panel].size(), SizeLabel::Normal);
    }
    if (areas.empty()) {
        if (informative) *informative = false;
        return sigma;  // all panels Nil
    }

    std::vector<int> labels = dbscan(areas, eps, min_pts);

    // Cluster means, then ranks by ascending mean area.
    int cluster_count = 0;
    for (int l : labels) cluster_count = std::max(cluster_count, l + 1);
    if (cluster_count == 0) {
        // every point is noise
        if (informative) *informative = false;
        return sigma;  // already all Normal
    }
    std::vector<double> mean(static_cast<std::size_t>(cluster_count), 0.0);
    std::vector<int> count(static_cast<std::size_t>(cluster_count), 0);
    for (std::size_t i = 0; i < areas.size(); ++i) {
        if (labels[i] < 0) continue;
        mean[static_cast<std::size_t>(labels[i])] += areas[i];
        ++count[static_cast<std::size_t>(labels[i])];
    }
    for (int c = 0; c < cluster_count; ++c)
        mean[static_cast<std::size_t>(c)] /= count[static_cast<std::size_t>(c)];

    std::vector<int> order(static_cast<std::size_t>(cluster_count));
    for (int c = 0; c < cluster_count; ++c) order[static_cast<std::size_t>(c)] = c;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return mean[static_cast<std::size_t>(a)] <
                                         mean[static_cast<std::size_t>(b)]; });
    std::vector<int> rank(static_cast<std::size_t>(cluster_count));
    for (int r = 0; r < cluster_count; ++r)
        rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;

    for (std::size_t i = 0; i < areas.size(); ++i) {
        int cluster = labels[i];
        if (cluster < 0) {
            // noise: nearest cluster mean
            double best = std::numeric_limits<double>::max();
            for (int c = 0; c < cluster_count; ++c) {
                double d = std::abs(areas[i] - mean[static_cast<std::size_t>(c)]);
                if (d < best) {
                    best = d;
                    cluster = c;
                }
            }
        }
        auto [panel, ordinal] = owner[i];
        sigma[panel][static_cast<std::size_t>(ordinal)] =
            rank_label(rank[static_cast<std::size_t>(cluster)], cluster_count);
    }
    return sigma;
}

// ---------------------------------------------------------------------------
// Knowledge acquisition
// ---------------------------------------------------------------------------

KnowledgeBase acquire_knowledge(const std::array<RasterImage, kPanelCount>& panels,
                                const FeatureConfig& cfg) {
    KnowledgeBase kb;
    std::array<std::vector<DetectedShape>, kPanelCount> detections;
    for (int i = 0; i < kPanelCount; ++i) {
        detections[i] = detect_shapes(panels[i]);
        kb.per_panel[i].chi = count_by_kind(detections[i]);
        for (const DetectedShape& s : detections[i])
            kb.shapes.insert({s.kind, s.filled});
    }

    // Size labels from pooled bbox areas; eps is a fraction of their range.
    double lo = std::numeric_limits<double>::max();
    double hi = std::numeric_limits<double>::lowest();
    for (const auto& panel : detections)
        for (const DetectedShape& s : panel) {
            double a = static_cast<double>(s.bbox.area());
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
    double eps = lo <= hi ? std::max(1.0, cfg.dbscan_eps_fraction * (hi - lo))
                          : 1.0;
    bool informative = true;
    auto sigma = extract_scaling(detections, eps, cfg.dbscan_min_pts,
                                 &informative);
    kb.sigma_informative = informative;
    for (int i = 0; i < kPanelCount; ++i)
        kb.per_panel[i].sigma = std::move(sigma[i]);

    // Rotation against the panel-1 orbit; all-or-nothing across the panels.
    if (!panels[0].blank()) {
        RotationOrbit orbit(panels[0]);
        std::array<RotationSearchResult, kPanelCount> results;
        bool all_pass = true;
        for (int i = 0; i < kPanelCount; ++i) {
            results[i] = orbit.estimate(panels[i], cfg.rotation_threshold);
            all_pass = all_pass && results[i].above_threshold;
        }
        if (all_pass)
            for (int i = 0; i < kPanelCount; ++i)
                kb.per_panel[i].rho = static_cast<double>(results[i].best_theta);
    }
    return kb;
}

KnowledgeBase acquire_knowledge(const ProblemSpace& p, const FeatureConfig& cfg) {
    validate(p);
    return acquire_knowledge(p.panels, cfg);
}

}  // namespace dr
