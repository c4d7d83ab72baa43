#include "dr/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dr {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double deg) { return deg * kPi / 180.0; }

// Circumradius in pixels.
double radius_px(const Primitive& prim, int width, int height) {
    return prim.size * std::min(width, height);
}

// Stroke width for outline (empty) shapes. Wide enough that binarized ink
// survives bilinear resampling when the panel is rotated.
double stroke_px(double radius) { return std::max(2.4, 0.13 * radius); }

// Base vertex profile per kind: (angle offset in degrees, radius fraction).
// Angles are in screen coordinates (y grows downward), so -90 points up.
std::vector<std::pair<double, double>> base_profile(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Triangle:
            return {{-90, 1}, {30, 1}, {150, 1}};
        case ShapeKind::Square:
            return {{45, 1}, {135, 1}, {225, 1}, {315, 1}};
        case ShapeKind::Diamond:
            return {{-90, 1}, {0, 1}, {90, 1}, {180, 1}};
        case ShapeKind::Hexagon:
            return {{0, 1}, {60, 1}, {120, 1}, {180, 1}, {240, 1}, {300, 1}};
        case ShapeKind::Star: {
            std::vector<std::pair<double, double>> prof;
            for (int k = 0; k < 10; ++k)
                prof.push_back({-90.0 + 36.0 * k, k % 2 == 0 ? 1.0 : 0.5});
            return prof;
        }
        case ShapeKind::Rectangle: {
            // 2:1 aspect, inscribed in the circumcircle.
            double phi = std::atan2(1.0, 2.0) * 180.0 / kPi;
            return {{-phi, 1}, {phi, 1}, {180 - phi, 1}, {180 + phi, 1}};
        }
        case ShapeKind::Circle:
            return {};
    }
    throw StructuralError("invalid ShapeKind value");
}

bool point_in_polygon(double px, double py, const std::vector<Vec2>& poly) {
    bool in = false;
    std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((poly[i].y > py) != (poly[j].y > py)) {
            double t = (py - poly[i].y) / (poly[j].y - poly[i].y);
            double xcross = poly[i].x + t * (poly[j].x - poly[i].x);
            if (px < xcross) in = !in;
        }
    }
    return in;
}

double point_boundary_distance(double px, double py,
                               const std::vector<Vec2>& poly) {
    double best = 1e18;
    std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        double vx = poly[i].x - poly[j].x;
        double vy = poly[i].y - poly[j].y;
        double wx = px - poly[j].x;
        double wy = py - poly[j].y;
        double vv = vx * vx + vy * vy;
        double t = vv == 0.0 ? 0.0 : std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0);
        best = std::min(best, std::hypot(wx - t * vx, wy - t * vy));
    }
    return best;
}

struct PrimitiveMask {
    // Membership test for one primitive at a continuous point. Outline
    // shapes are an inside band of uniform stroke thickness along the
    // boundary (a shrunk-polygon cut would pinch at edge midpoints).
    Primitive prim;
    double cx, cy, radius, stroke;
    std::vector<Vec2> outer;

    bool contains(double px, double py) const {
        if (prim.kind == ShapeKind::Circle) {
            double d = std::hypot(px - cx, py - cy);
            if (prim.filled) return d <= radius;
            return d <= radius && d >= radius - stroke;
        }
        if (!point_in_polygon(px, py, outer)) return false;
        if (prim.filled) return true;
        return point_boundary_distance(px, py, outer) <= stroke;
    }
};

PrimitiveMask make_mask(const Primitive& prim, int width, int height) {
    PrimitiveMask m;
    m.prim = prim;
    m.cx = prim.cx * width;
    m.cy = prim.cy * height;
    m.radius = radius_px(prim, width, height);
    m.stroke = stroke_px(m.radius);
    m.outer = polygon_vertices(prim, width, height);
    return m;
}

}  // namespace

std::vector<Vec2> polygon_vertices(const Primitive& prim, int width,
                                   int height) {
    std::vector<Vec2> verts;
    double cx = prim.cx * width;
    double cy = prim.cy * height;
    double radius = radius_px(prim, width, height);
    for (const auto& [angle, frac] : base_profile(prim.kind)) {
        double a = deg2rad(angle + prim.rotation_deg);
        double vx = cx + frac * radius * std::cos(a);
        double vy = cy + frac * radius * std::sin(a);
        verts.push_back({std::round(vx), std::round(vy)});
    }
    return verts;
}

void validate_scene(const Scene& scene) {
    if (scene.width < 32 || scene.height < 32)
        throw StructuralError("panel size must be at least 32x32");
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        const Primitive& p = scene.primitives[i];
        if (p.size <= 0.0 || p.size > 1.0)
            throw StructuralError("primitive size out of (0,1]");
        if (p.cx < 0.0 || p.cx > 1.0 || p.cy < 0.0 || p.cy > 1.0)
            throw StructuralError("primitive center out of [0,1]^2");
        if (p.rotation_deg < 0.0 || p.rotation_deg >= 360.0)
            throw StructuralError("primitive rotation out of [0,360)");
        double r = radius_px(p, scene.width, scene.height);
        double cx = p.cx * scene.width;
        double cy = p.cy * scene.height;
        if (cx - r < 1.0 || cx + r > scene.width - 1.0 || cy - r < 1.0 ||
            cy + r > scene.height - 1.0)
            throw StructuralError("primitive out of bounds after rasterization");
    }
    // Pairwise circumcircle separation >= 2 px.
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        for (std::size_t j = i + 1; j < scene.primitives.size(); ++j) {
            const Primitive& a = scene.primitives[i];
            const Primitive& b = scene.primitives[j];
            double d = std::hypot((a.cx - b.cx) * scene.width,
                                  (a.cy - b.cy) * scene.height);
            double ra = radius_px(a, scene.width, scene.height);
            double rb = radius_px(b, scene.width, scene.height);
            if (d < ra + rb + 2.0)
                throw StructuralError("primitives overlap or touch");
        }
    }
}

RasterImage rasterize(const Scene& scene) {
    validate_scene(scene);
    RasterImage img(scene.width, scene.height, 255);
    std::vector<PrimitiveMask> masks;
    masks.reserve(scene.primitives.size());
    for (const Primitive& p : scene.primitives)
        masks.push_back(make_mask(p, scene.width, scene.height));

    for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
            double px = x + 0.5;
            double py = y + 0.5;
            for (const PrimitiveMask& m : masks) {
                // Cheap circumcircle reject before the polygon test.
                double dx = px - m.cx;
                double dy = py - m.cy;
                if (dx * dx + dy * dy > (m.radius + 1.5) * (m.radius + 1.5))
                    continue;
                if (m.contains(px, py)) {
                    img.at(x, y) = 0;
                    break;
                }
            }
        }
    }
    return img;
}

namespace {

RasterImage rotate_exact_90(const RasterImage& img, int quarter_turns) {
    int w = img.width;
    int h = img.height;
    RasterImage out(w, h, 255);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            switch (quarter_turns) {
                case 1: out.at(x, y) = img.at(y, h - 1 - x); break;
                case 2: out.at(x, y) = img.at(w - 1 - x, h - 1 - y); break;
                case 3: out.at(x, y) = img.at(w - 1 - y, x); break;
                default: out.at(x, y) = img.at(x, y); break;
            }
        }
    }
    return out;
}

}  // namespace

RasterImage rotate_image(const RasterImage& img, double theta_deg) {
    if (theta_deg == 0.0) return img;
    // Exact permutations for quarter turns (180 works for any aspect,
    // 90/270 need a square panel).
    if (theta_deg == 180.0) return rotate_exact_90(img, 2);
    if (img.width == img.height) {
        if (theta_deg == 90.0) return rotate_exact_90(img, 1);
        if (theta_deg == 270.0) return rotate_exact_90(img, 3);
    }

    int w = img.width;
    int h = img.height;
    RasterImage out(w, h, 255);
    double cx = w / 2.0;
    double cy = h / 2.0;
    double c = std::cos(deg2rad(-theta_deg));
    double s = std::sin(deg2rad(-theta_deg));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double dx = (x + 0.5) - cx;
            double dy = (y + 0.5) - cy;
            double sx = cx + c * dx - s * dy;
            double sy = cy + s * dx + c * dy;
            // Bilinear sample at (sx, sy); out-of-range taps read background.
            double u = sx - 0.5;
            double v = sy - 0.5;
            int x0 = static_cast<int>(std::floor(u));
            int y0 = static_cast<int>(std::floor(v));
            double fx = u - x0;
            double fy = v - y0;
            double acc = 0.0;
            for (int ky = 0; ky <= 1; ++ky) {
                for (int kx = 0; kx <= 1; ++kx) {
                    double wgt = (kx ? fx : 1.0 - fx) * (ky ? fy : 1.0 - fy);
                    int xi = x0 + kx;
                    int yi = y0 + ky;
                    double val = (xi >= 0 && xi < w && yi >= 0 && yi < h)
                                     ? img.at(xi, yi)
                                     : 255.0;
                    acc += wgt * val;
                }
            }
            out.at(x, y) = static_cast<std::uint8_t>(
                std::clamp(std::lround(acc), 0L, 255L));
        }
    }
    return out;
}

SimilarityScore binary_ncc(long long ink_a, long long ink_b, long long overlap,
                           long long n) {
    // NCC of mean-centered 0/1 ink masks reduces to the integer counts
    // (ink_a, ink_b, overlap), which keeps equal inputs at exactly 1.0 and
    // the score independent of summation order.
    if (ink_a == ink_b && overlap == ink_a) return 1.0;  // identical masks
    if (ink_a == 0 || ink_b == 0) return 0.0;            // blank vs non-blank
    if (ink_a == n || ink_b == n) return 0.0;            // zero variance
    double nd = static_cast<double>(n);
    double num = overlap - static_cast<double>(ink_a) * ink_b / nd;
    double var_a = ink_a - static_cast<double>(ink_a) * ink_a / nd;
    double var_b = ink_b - static_cast<double>(ink_b) * ink_b / nd;
    return std::clamp(num / (std::sqrt(var_a) * std::sqrt(var_b)), -1.0, 1.0);
}

SimilarityScore similarity(const RasterImage& a, const RasterImage& b) {
    if (a.width != b.width || a.height != b.height)
        throw StructuralError("similarity: dimension mismatch");
    std::size_t n = a.pixels.size();
    long long ink_a = 0, ink_b = 0, overlap = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool ia = a.pixels[i] < 128;
        bool ib = b.pixels[i] < 128;
        ink_a += ia;
        ink_b += ib;
        overlap += ia && ib;
    }
    return binary_ncc(ink_a, ink_b, overlap, static_cast<long long>(n));
}

long long ink_count(const RasterImage& img) {
    long long count = 0;
    for (std::uint8_t v : img.pixels) count += v < 128;
    return count;
}

std::string encode_pgm(const RasterImage& img) {
    std::ostringstream os;
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    return os.str();
}

RasterImage decode_pgm(const std::string& bytes) {
    std::size_t pos = 0;
    auto skip_space = [&]() {
        while (pos < bytes.size()) {
            char c = bytes[pos];
            if (c == '#') {  // comment to end of line
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_token = [&]() {
        skip_space();
        std::size_t start = pos;
        while (pos < bytes.size() &&
               !std::isspace(static_cast<unsigned char>(bytes[pos])))
            ++pos;
        if (start == pos) throw DataError("corrupt PGM: truncated header");
        return bytes.substr(start, pos - start);
    };

    if (read_token() != "P5") throw DataError("corrupt PGM: expected P5 magic");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(read_token());
        h = std::stoi(read_token());
        maxval = std::stoi(read_token());
    } catch (const std::exception&) {
        throw DataError("corrupt PGM: non-numeric header field");
    }
    if (w <= 0 || h <= 0) throw DataError("corrupt PGM: bad dimensions");
    if (maxval != 255) throw DataError("corrupt PGM: maxval must be 255");
    if (pos >= bytes.size()) throw DataError("corrupt PGM: missing pixel data");
    ++pos;  // single whitespace after maxval
    std::size_t count = static_cast<std::size_t>(w) * h;
    if (bytes.size() - pos < count)
        throw DataError("corrupt PGM: truncated pixel data");
    RasterImage img(w, h);
    std::memcpy(img.pixels.data(), bytes.data() + pos, count);
    return img;
}

void write_pgm(const RasterImage& img, const std::string& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open for writing: " + path);
    std::string bytes = encode_pgm(img);
    file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!file) throw DataError("write failed: " + path);
}

RasterImage read_pgm(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open: " + path);
    std::ostringstream os;
    os << file.rdbuf();
    return decode_pgm(os.str());
}

std::vector<double> mean_pool(const RasterImage& img, int grid_w, int grid_h) {
    if (grid_w <= 0 || grid_h <= 0)
        throw StructuralError("mean_pool: grid must be positive");
    std::vector<double> out(static_cast<std::size_t>(grid_w) * grid_h, 0.0);
    std::vector<long long> weight(out.size(), 0);
    for (int y = 0; y < img.height; ++y) {
        int gy = static_cast<int>(static_cast<long long>(y) * grid_h / img.height);
        for (int x = 0; x < img.width; ++x) {
            int gx = static_cast<int>(static_cast<long long>(x) * grid_w / img.width);
            std::size_t idx = static_cast<std::size_t>(gy) * grid_w + gx;
            out[idx] += img.at(x, y) / 255.0;
            ++weight[idx];
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        if (weight[i] > 0) out[i] /= static_cast<double>(weight[i]);
    return out;
}

}  // namespace dr
