#include "dr/perception.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace dr {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Point {
    int x = 0;
    int y = 0;
};

// 8-neighborhood in clockwise order for y-down coordinates.
constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

struct Grid {
    int width = 0;
    int height = 0;
    std::vector<int> cells;  // component label per pixel, 0 = background

    int at(int x, int y) const {
        if (x < 0 || x >= width || y < 0 || y >= height) return 0;
        return cells[static_cast<std::size_t>(y) * width + x];
    }
    void set(int x, int y, int v) {
        cells[static_cast<std::size_t>(y) * width + x] = v;
    }
};

Grid label_components(const RasterImage& img, int& label_count) {
    Grid grid{img.width, img.height,
              std::vector<int>(img.pixels.size(), 0)};
    int next = 0;
    std::deque<Point> queue;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!img.ink(x, y) || grid.at(x, y) != 0) continue;
            ++next;
            grid.set(x, y, next);
            queue.push_back({x, y});
            while (!queue.empty()) {
                Point p = queue.front();
                queue.pop_front();
                for (int d = 0; d < 8; ++d) {
                    int nx = p.x + kDx[d];
                    int ny = p.y + kDy[d];
                    if (nx < 0 || nx >= img.width || ny < 0 || ny >= img.height)
                        continue;
                    if (img.ink(nx, ny) && grid.at(nx, ny) == 0) {
                        grid.set(nx, ny, next);
                        queue.push_back({nx, ny});
                    }
                }
            }
        }
    }
    label_count = next;
    return grid;
}

// Binary mask over an expanded component bbox; used for hole analysis and
// silhouette extraction over one component in isolation.
struct LocalMask {
    int x0 = 0, y0 = 0, w = 0, h = 0;
    std::vector<std::uint8_t> on;

    bool get(int gx, int gy) const {
        int lx = gx - x0, ly = gy - y0;
        if (lx < 0 || lx >= w || ly < 0 || ly >= h) return false;
        return on[static_cast<std::size_t>(ly) * w + lx] != 0;
    }
    void set(int gx, int gy) {
        on[static_cast<std::size_t>((gy - y0)) * w + (gx - x0)] = 1;
    }
};

LocalMask make_local(const ComponentMask& comp) {
    LocalMask m;
    m.x0 = comp.bbox.x0 - 1;
    m.y0 = comp.bbox.y0 - 1;
    m.w = comp.bbox.width() + 2;
    m.h = comp.bbox.height() + 2;
    m.on.assign(static_cast<std::size_t>(m.w) * m.h, 0);
    for (const auto& [x, y] : comp.pixels) m.set(x, y);
    return m;
}

// Fill the component's holes: background cells of the local window not
// 4-connected to the window border become part of the silhouette.
// Returns the hole count (number of enclosed background regions).
int fill_holes(LocalMask& mask) {
    int w = mask.w, h = mask.h;
    std::vector<std::uint8_t> outside(static_cast<std::size_t>(w) * h, 0);
    std::deque<Point> queue;
    auto push = [&](int lx, int ly) {
        std::size_t idx = static_cast<std::size_t>(ly) * w + lx;
        if (outside[idx] || mask.on[idx]) return;
        outside[idx] = 1;
        queue.push_back({lx, ly});
    };
    for (int x = 0; x < w; ++x) {
        push(x, 0);
        push(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        push(0, y);
        push(w - 1, y);
    }
    while (!queue.empty()) {
        Point p = queue.front();
        queue.pop_front();
        if (p.x > 0) push(p.x - 1, p.y);
        if (p.x < w - 1) push(p.x + 1, p.y);
        if (p.y > 0) push(p.x, p.y - 1);
        if (p.y < h - 1) push(p.x, p.y + 1);
    }
    // Any cell neither ink nor outside is a hole cell; count regions and fill.
    int holes = 0;
    for (int ly = 0; ly < h; ++ly) {
        for (int lx = 0; lx < w; ++lx) {
            std::size_t idx = static_cast<std::size_t>(ly) * w + lx;
            if (mask.on[idx] || outside[idx]) continue;
            ++holes;
            queue.push_back({lx, ly});
            mask.on[idx] = 1;
            while (!queue.empty()) {
                Point p = queue.front();
                queue.pop_front();
                for (int d = 0; d < 8; d += 2) {  // 4-connected background
                    int nx = p.x + kDx[d];
                    int ny = p.y + kDy[d];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                    if (!mask.on[nidx] && !outside[nidx]) {
                        mask.on[nidx] = 1;
                        queue.push_back({p.x + kDx[d], p.y + kDy[d]});
                    }
                }
            }
        }
    }
    return holes;
}

// Moore-neighbor boundary trace (clockwise), on the silhouette mask.
// Coordinates are global pixel coordinates.
std::vector<Point> trace_contour(const LocalMask& mask) {
    // Start pixel: topmost, then leftmost silhouette pixel.
    Point start{-1, -1};
    for (int ly = 0; ly < mask.h && start.x < 0; ++ly)
        for (int lx = 0; lx < mask.w; ++lx)
            if (mask.on[static_cast<std::size_t>(ly) * mask.w + lx]) {
                start = {lx + mask.x0, ly + mask.y0};
                break;
            }
    if (start.x < 0) return {};

    std::vector<Point> contour;
    contour.push_back(start);
    // Arrived "moving east"; first scan direction is north (6), which is
    // guaranteed background for the topmost-leftmost start pixel.
    Point cur = start;
    int dir = 0;
    int first_dir = -1;
    const std::size_t limit = mask.on.size() * 4 + 8;
    while (contour.size() < limit) {
        int scan = (dir + 6) % 8;
        int found = -1;
        for (int k = 0; k < 8; ++k) {
            int d = (scan + k) % 8;
            if (mask.get(cur.x + kDx[d], cur.y + kDy[d])) {
                found = d;
                break;
            }
        }
        if (found < 0) break;  // isolated pixel
        if (cur.x == start.x && cur.y == start.y) {
            if (first_dir < 0)
                first_dir = found;
            else if (found == first_dir)
                break;  // closed the loop with the same exit direction
        }
        cur = {cur.x + kDx[found], cur.y + kDy[found]};
        dir = found;
        if (cur.x == start.x && cur.y == start.y) {
            // Peek the next move; loop closes when it repeats the first one.
            int nscan = (dir + 6) % 8;
            int nfound = -1;
            for (int k = 0; k < 8; ++k) {
                int d = (nscan + k) % 8;
                if (mask.get(cur.x + kDx[d], cur.y + kDy[d])) {
                    nfound = d;
                    break;
                }
            }
            if (nfound == first_dir || nfound < 0) break;
        }
        contour.push_back(cur);
    }
    // Drop the duplicated closing point if present.
    if (contour.size() > 1 && contour.front().x == contour.back().x &&
        contour.front().y == contour.back().y)
        contour.pop_back();
    return contour;
}

double contour_length(const std::vector<Point>& contour) {
    if (contour.size() < 2) return 1.0;
    double len = 0.0;
    for (std::size_t i = 0; i < contour.size(); ++i) {
        const Point& a = contour[i];
        const Point& b = contour[(i + 1) % contour.size()];
        len += (a.x != b.x && a.y != b.y) ? std::sqrt(2.0) : 1.0;
    }
    return len;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    double vx = b.x - a.x, vy = b.y - a.y;
    double wx = p.x - a.x, wy = p.y - a.y;
    double vv = vx * vx + vy * vy;
    if (vv == 0.0) return std::hypot(wx, wy);
    double t = std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0);
    return std::hypot(wx - t * vx, wy - t * vy);
}

// Douglas-Peucker over an open polyline segment [lo, hi] of the contour.
void dp_simplify(const std::vector<Point>& pts, std::size_t lo, std::size_t hi,
                 double eps, std::vector<std::size_t>& keep) {
    if (hi <= lo + 1) return;
    double best = -1.0;
    std::size_t best_i = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
        double d = point_segment_distance(pts[i], pts[lo], pts[hi]);
        if (d > best) {
            best = d;
            best_i = i;
        }
    }
    if (best > eps) {
        dp_simplify(pts, lo, best_i, eps, keep);
        keep.push_back(best_i);
        dp_simplify(pts, best_i, hi, eps, keep);
    }
}

// Dominant points of a closed contour via maximal distance-to-chord.
std::vector<Point> dominant_points(const std::vector<Point>& contour,
                                   double eps) {
    std::size_t n = contour.size();
    if (n <= 3) return contour;
    // Anchors: point 0 and the point farthest from it.
    std::size_t far_i = 1;
    double far_d = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        double d = std::hypot(contour[i].x - contour[0].x,
                              contour[i].y - contour[0].y);
        if (d > far_d) {
            far_d = d;
            far_i = i;
        }
    }
    std::vector<std::size_t> keep{0};
    dp_simplify(contour, 0, far_i, eps, keep);
    keep.push_back(far_i);
    // Second arc wraps; unroll it into an extended index space.
    std::vector<Point> arc(contour.begin() + static_cast<long>(far_i),
                           contour.end());
    arc.push_back(contour[0]);
    std::vector<std::size_t> keep2;
    dp_simplify(arc, 0, arc.size() - 1, eps, keep2);
    for (std::size_t k : keep2) keep.push_back(far_i + k);

    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    std::vector<Point> out;
    for (std::size_t k : keep) out.push_back(contour[k % n]);
    return out;
}

struct VertexInfo {
    Point p;
    double turn_deg = 0.0;  // signed exterior turn; positive agrees with
                            // the contour orientation (convex)
};

std::vector<VertexInfo> polygon_turns(const std::vector<Point>& poly) {
    std::size_t n = poly.size();
    std::vector<VertexInfo> info(n);
    // Signed area sign gives the traversal orientation.
    long long area2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        area2 += static_cast<long long>(a.x) * b.y -
                 static_cast<long long>(b.x) * a.y;
    }
    double orient = area2 >= 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& prev = poly[(i + n - 1) % n];
        const Point& cur = poly[i];
        const Point& next = poly[(i + 1) % n];
        double ax = cur.x - prev.x, ay = cur.y - prev.y;
        double bx = next.x - cur.x, by = next.y - cur.y;
        double cross = ax * by - ay * bx;
        double dot = ax * bx + ay * by;
        double turn = std::atan2(cross, dot) * 180.0 / kPi;
        info[i] = {cur, orient * turn};
    }
    return info;
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point& a, const Point& b) {
                              return a.x == b.x && a.y == b.y;
                          }),
              pts.end());
    std::size_t n = pts.size();
    if (n < 3) return pts;
    auto cross = [](const Point& o, const Point& a, const Point& b) {
        return static_cast<long long>(a.x - o.x) * (b.y - o.y) -
               static_cast<long long>(a.y - o.y) * (b.x - o.x);
    };
    std::vector<Point> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// Hull area by shoelace, plus half the perimeter plus one (Pick-style pad so
// a hull over pixel centers approximates the pixel-covered area).
double hull_area(const std::vector<Point>& hull) {
    std::size_t n = hull.size();
    if (n < 3) return static_cast<double>(n);
    double area2 = 0.0;
    double perim = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = hull[i];
        const Point& b = hull[(i + 1) % n];
        area2 += static_cast<double>(a.x) * b.y - static_cast<double>(b.x) * a.y;
        perim += std::hypot(static_cast<double>(b.x - a.x),
                            static_cast<double>(b.y - a.y));
    }
    return std::abs(area2) / 2.0 + perim / 2.0 + 1.0;
}

struct KindGuess {
    ShapeKind kind = ShapeKind::Circle;
    double confidence = 0.0;
};

KindGuess classify_four_corner(const std::vector<Point>& corners) {
    std::array<double, 4> len{};
    std::array<double, 4> ang{};
    for (int i = 0; i < 4; ++i) {
        const Point& a = corners[i];
        const Point& b = corners[(i + 1) % 4];
        len[i] = std::hypot(static_cast<double>(b.x - a.x),
                            static_cast<double>(b.y - a.y));
        double theta = std::atan2(static_cast<double>(b.y - a.y),
                                  static_cast<double>(b.x - a.x)) *
                       180.0 / kPi;
        ang[i] = theta - 90.0 * std::floor(theta / 90.0);  // fold into [0,90)
    }
    double la = (len[0] + len[2]) / 2.0;
    double lb = (len[1] + len[3]) / 2.0;
    double aspect = std::max(la, lb) / std::max(1e-9, std::min(la, lb));
    if (aspect >= 1.4) return {ShapeKind::Rectangle, aspect >= 1.6 ? 0.9 : 0.6};
    double dev_axis = 0.0, dev_diag = 0.0;
    for (double a : ang) {
        dev_axis += std::min(a, 90.0 - a);
        dev_diag += std::abs(45.0 - a);
    }
    if (dev_axis <= dev_diag) return {ShapeKind::Square, 0.9};
    return {ShapeKind::Diamond, 0.9};
}

KindGuess classify_silhouette(const std::vector<Point>& contour,
                              double perimeter, double silhouette_area) {
    double circularity =
        4.0 * kPi * silhouette_area / std::max(1.0, perimeter * perimeter);
    if (contour.size() < 8)
        return {circularity > 0.85 ? ShapeKind::Circle : ShapeKind::Square, 0.3};

    double eps = std::max(1.2, 0.02 * perimeter);
    std::vector<Point> poly = dominant_points(contour, eps);
    std::vector<VertexInfo> turns = polygon_turns(poly);

    int corners = 0;
    int concave = 0;
    for (const VertexInfo& v : turns) {
        if (std::abs(v.turn_deg) >= 35.0) {
            ++corners;
            if (v.turn_deg < 0.0) ++concave;
        }
    }

    if (concave >= 2) return {ShapeKind::Star, concave == 5 ? 0.95 : 0.6};
    if (corners == 3) return {ShapeKind::Triangle, 0.95};
    if (corners == 4) {
        std::vector<Point> sig;
        for (const VertexInfo& v : turns)
            if (std::abs(v.turn_deg) >= 35.0) sig.push_back(v.p);
        return classify_four_corner(sig);
    }
    if (corners == 6 && circularity < 0.90) return {ShapeKind::Hexagon, 0.85};
    if (circularity > 0.85) return {ShapeKind::Circle, 0.9};
    // Nothing matched cleanly; guess from the closest template.
    if (corners == 5 || corners == 6)
        return {circularity < 0.90 ? ShapeKind::Hexagon : ShapeKind::Circle, 0.4};
    if (corners > 6) return {ShapeKind::Circle, 0.35};
    return {ShapeKind::Square, 0.2};
}

}  // namespace

std::vector<ComponentMask> connected_components(const RasterImage& img) {
    int label_count = 0;
    Grid grid = label_components(img, label_count);
    std::vector<ComponentMask> comps(static_cast<std::size_t>(label_count));
    for (int i = 0; i < label_count; ++i) {
        comps[i].label = i + 1;
        comps[i].bbox = {img.width, img.height, 0, 0};
    }
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int label = grid.at(x, y);
            if (label == 0) continue;
            ComponentMask& c = comps[static_cast<std::size_t>(label - 1)];
            c.pixels.push_back({x, y});
            c.bbox.x0 = std::min(c.bbox.x0, x);
            c.bbox.y0 = std::min(c.bbox.y0, y);
            c.bbox.x1 = std::max(c.bbox.x1, x + 1);
            c.bbox.y1 = std::max(c.bbox.y1, y + 1);
        }
    }
    for (ComponentMask& c : comps) {
        c.area = static_cast<long long>(c.pixels.size());
        LocalMask local = make_local(c);
        c.hole_count = fill_holes(local);
        c.perimeter = contour_length(trace_contour(local));
    }
    return comps;
}

std::vector<DetectedShape> detect_shapes(const RasterImage& img) {
    std::vector<DetectedShape> out;
    for (const ComponentMask& comp : connected_components(img)) {
        LocalMask silhouette = make_local(comp);
        int holes = fill_holes(silhouette);
        std::vector<Point> contour = trace_contour(silhouette);
        double perim = contour_length(contour);
        double sil_area = 0.0;
        for (std::uint8_t v : silhouette.on) sil_area += v;

        KindGuess guess = classify_silhouette(contour, perim, sil_area);

        std::vector<Point> pts;
        pts.reserve(comp.pixels.size());
        for (const auto& [x, y] : comp.pixels) pts.push_back({x, y});
        double hull = hull_area(convex_hull(std::move(pts)));
        bool filled = holes == 0 &&
                      static_cast<double>(comp.area) >= 0.5 * hull;

        DetectedShape shape;
        shape.kind = guess.kind;
        shape.filled = filled;
        shape.bbox = comp.bbox;
        shape.confidence = guess.confidence;
        out.push_back(shape);
    }
    return out;
}

std::map<ShapeKind, int> count_by_kind(const std::vector<DetectedShape>& shapes) {
    std::map<ShapeKind, int> counts;
    for (const DetectedShape& s : shapes) ++counts[s.kind];
    return counts;
}

}  // namespace dr
