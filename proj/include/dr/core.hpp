#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dr {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes (see tools/).
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed in-memory data: wrong panel count, dimension mismatch, bad enum.
struct StructuralError : Error {
    using Error::Error;
};

// Corpus / file IO problems: missing panels, corrupt PGM, version mismatch.
struct DataError : Error {
    using Error::Error;
};

// Bad configuration: unknown flags, missing checkpoints, invalid params.
struct ConfigError : Error {
    using Error::Error;
};

// The synthesizer could not satisfy its constraints (e.g. packing failure).
struct GenerationError : Error {
    using Error::Error;
};

// Training diverged (NaN loss) or could not run.
struct TrainingError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Shape vocabulary
// ---------------------------------------------------------------------------

enum class ShapeKind : std::uint8_t {
    Circle = 0,
    Triangle,
    Rectangle,
    Square,
    Diamond,
    Star,
    Hexagon,
};

inline constexpr int kShapeKindCount = 7;

inline constexpr std::array<ShapeKind, kShapeKindCount> all_shape_kinds() {
    return {ShapeKind::Circle,  ShapeKind::Triangle, ShapeKind::Rectangle,
            ShapeKind::Square,  ShapeKind::Diamond,  ShapeKind::Star,
            ShapeKind::Hexagon};
}

// Serialized names are lowercase and stable.
std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

// ---------------------------------------------------------------------------
// Problem categories
// ---------------------------------------------------------------------------

enum class Category : std::uint8_t {
    RT = 0,  // rotation
    CT,      // counting
    SS,      // shape scaling
    OT,      // other / pattern
};

inline constexpr int kCategoryCount = 4;

inline constexpr std::array<Category, kCategoryCount> all_categories() {
    return {Category::RT, Category::CT, Category::SS, Category::OT};
}

std::string to_string(Category c);
Category category_from_string(const std::string& name);

// RT/CT/SS route to the feature predictors, OT to the image predictor.
inline bool is_category1(Category c) { return c != Category::OT; }

// ---------------------------------------------------------------------------
// Size labels: a fixed 6-level ordered scale
// ---------------------------------------------------------------------------

enum class SizeLabel : std::uint8_t {
    Nil = 0,
    Tiny,
    Small,
    Normal,
    Large,
    VeryLarge,
};

inline constexpr int kSizeLabelCount = 6;

std::string to_string(SizeLabel label);
SizeLabel size_label_from_string(const std::string& name);

inline int ordinal(SizeLabel label) { return static_cast<int>(label); }

// ---------------------------------------------------------------------------
// Scene: vector ground truth for one panel
// ---------------------------------------------------------------------------

struct Primitive {
    ShapeKind kind = ShapeKind::Circle;
    double cx = 0.5;            // normalized [0,1]
    double cy = 0.5;            // normalized [0,1]
    double size = 0.25;         // circumradius as fraction of min(panel w,h), in (0,1]
    double rotation_deg = 0.0;  // [0,360)
    bool filled = true;

    bool operator==(const Primitive&) const = default;
};

struct Scene {
    int width = 64;
    int height = 64;
    std::vector<Primitive> primitives;

    bool operator==(const Scene&) const = default;
};

// ---------------------------------------------------------------------------
// RasterImage: 8-bit grayscale, background 255, ink 0
// ---------------------------------------------------------------------------

struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, size = width * height

    RasterImage() = default;
    RasterImage(int w, int h, std::uint8_t fill = 255)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t at(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t& at(int x, int y) {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }

    bool ink(int x, int y) const { return at(x, y) < 128; }

    bool blank() const;  // true when every pixel binarizes to background

    bool operator==(const RasterImage&) const = default;
};

// ---------------------------------------------------------------------------
// ProblemSpace: the 7 panels (3 question + 4 options)
// ---------------------------------------------------------------------------

inline constexpr int kPanelCount = 7;
inline constexpr int kQuestionCount = 3;
inline constexpr int kOptionCount = 4;

// Panel numbers are 1-based in the contract: question 1..3, options 4..7.
// Arrays below are 0-based; panel j lives at index j-1.
struct ProblemSpace {
    std::array<RasterImage, kPanelCount> panels;
    std::optional<std::array<Scene, kPanelCount>> scenes;
    int answer_index = 4;  // in {4,5,6,7}; options rendered to users as A..D
    std::optional<Category> true_category;

    bool operator==(const ProblemSpace&) const = default;
};

// Throws StructuralError if the panel geometry or answer_index is invalid.
void validate(const ProblemSpace& p);

struct SplitProblem {
    std::array<RasterImage, kQuestionCount> question;
    std::array<RasterImage, kOptionCount> options;
};

SplitProblem split_problem(const ProblemSpace& p);

// 'A'..'D' for answer_index 4..7.
char option_letter(int answer_index);

// ---------------------------------------------------------------------------
// Detections and relational features
// ---------------------------------------------------------------------------

// Pixel rectangle, x1/y1 exclusive. Non-degenerate iff x1 > x0 and y1 > y0.
struct BBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const { return static_cast<long long>(width()) * height(); }

    bool operator==(const BBox&) const = default;
};

struct DetectedShape {
    ShapeKind kind = ShapeKind::Circle;
    bool filled = false;
    BBox bbox;
    double confidence = 0.0;  // in [0,1]; < 0.5 marks a best-effort guess

    bool operator==(const DetectedShape&) const = default;
};

// Per-panel relational features (rotation / counts / size labels).
struct RelationalFeatures {
    std::optional<double> rho;          // degrees in [0,360); nullopt = NA
    std::map<ShapeKind, int> chi;       // counts per kind; absent kind = 0
    std::vector<SizeLabel> sigma;       // one label per detected-shape ordinal

    int chi_count(ShapeKind kind) const {
        auto it = chi.find(kind);
        return it == chi.end() ? 0 : it->second;
    }
    int chi_total() const;

    bool operator==(const RelationalFeatures&) const = default;
};

struct KnowledgeBase {
    std::array<RelationalFeatures, kPanelCount> per_panel;
    std::set<std::pair<ShapeKind, bool>> shapes;  // (kind, filled) present in P
    bool sigma_informative = true;  // false when size clustering degenerated

    // Structured text record (shapes / rho / chi / sigma lines) for debugging
    // and golden tests.
    std::string to_text() const;
};

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

struct Prediction {
    std::optional<RelationalFeatures> predicted_rf;     // category 1
    std::optional<std::vector<double>> predicted_vector;  // category 2
    int chosen_option = 4;                               // in {4,5,6,7}
    std::array<double, kOptionCount> score_per_option{};  // higher is better
};

// argmax with lowest-index tie-break; returns an answer_index in {4..7}.
int choose_option(const std::array<double, kOptionCount>& scores);

}  // namespace dr
