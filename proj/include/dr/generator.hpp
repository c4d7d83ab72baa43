#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dr/core.hpp"

namespace dr {

// Arithmetic count progressions {a, a+d, a+2d} -> a+3d, with a+3d <= max_total.
struct CountProgressionRange {
    int a_min = 1;
    int a_max = 6;
    int d_min = 1;
    int d_max = 3;
    int max_total = 12;
};

struct GeneratorSpec {
    std::uint64_t seed = 42;
    std::array<int, kCategoryCount> counts{};  // indexed by Category order
    int panel_size = 64;
    std::vector<double> rotation_steps{45.0, 90.0, 135.0};
    CountProgressionRange count_progressions;
    std::array<double, 4> scale_ladder{0.45, 0.32, 0.21, 0.12};  // descending

    int count_for(Category c) const {
        return counts[static_cast<std::size_t>(c)];
    }
    int total() const;
};

void validate(const GeneratorSpec& spec);

/// Deterministic given (spec.seed, category, ordinal); problems may be
/// generated in parallel by splitting the ordinal range.
ProblemSpace generate_problem(const GeneratorSpec& spec, Category category,
                              std::uint64_t ordinal);

/// All requested problems, grouped by category in enum order. Every problem
/// carries scenes, answer_index and true_category ground truth.
std::vector<ProblemSpace> generate_corpus(const GeneratorSpec& spec);

// Smallest primitive size at which the detector reads this kind reliably;
// the generator never emits a kind below its floor in count-sensitive panels.
double kind_min_size(ShapeKind kind);

}  // namespace dr
