#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dr/core.hpp"
#include "dr/features.hpp"
#include "dr/seqnet.hpp"

namespace dr {

// Sequence predictor backing: trained models, or the deterministic
// arithmetic extrapolation used as a diagnostic oracle.
enum class PredictorMode { Lstm, Arithmetic };

// Full pipeline, or the ablation solvers (image vectors for every category /
// one monolithic RF predictor without category routing).
enum class SolverVariant { Full, ImageOnly, RfMonolithic };

struct SolverConfig {
    FeatureConfig features;
    int grid_size = 16;  // image-vector grid for category 2; >= 8
    PredictorMode predictor = PredictorMode::Lstm;
    SolverVariant variant = SolverVariant::Full;
};

void validate(const SolverConfig& cfg);

// The four sequence models of the pipeline plus the ablation models.
struct ModelSet {
    LstmModel rt, ct, ss, ot;
    std::optional<LstmModel> image;  // image-only ablation
    std::optional<LstmModel> rf;     // monolithic RF ablation

    const LstmModel& category1(Category c) const;
};

// ---------------------------------------------------------------------------
// Classification (rule cascade over the question panels only)
// ---------------------------------------------------------------------------

Category classify(const KnowledgeBase& kb);

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

Prediction predict_category1(const KnowledgeBase& kb, Category category,
                             const LstmModel& model, PredictorMode mode);

Prediction predict_category2(const std::array<RasterImage, kPanelCount>& panels,
                             const LstmModel& model, int grid_size);

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// Scores every option against the predicted knowledge (feature distance for
/// category 1, cosine over pooled ink vectors for category 2) and picks the
/// argmax, lowest option index on ties. Returns the prediction with
/// score_per_option and chosen_option filled in.
Prediction match(Prediction prediction, Category category,
                 const std::array<RasterImage, kPanelCount>& panels,
                 const KnowledgeBase& kb, int grid_size);

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

struct SolveRecord {
    Category detected_category = Category::OT;
    Prediction prediction;  // chosen_option is the answer, in {4..7}
};

/// acquire_knowledge -> classify -> route to one predictor -> match.
/// Takes bare panels: ground-truth labels are structurally out of reach.
SolveRecord solve(const std::array<RasterImage, kPanelCount>& panels,
                  const ModelSet& models, const SolverConfig& cfg);

// ---------------------------------------------------------------------------
// Training-sample builders (training-time only; they see the answer index)
// ---------------------------------------------------------------------------

TrainSample make_category1_sample(const KnowledgeBase& kb, Category category,
                                  int answer_index);
TrainSample make_image_sample(const std::array<RasterImage, kPanelCount>& panels,
                              int answer_index, int grid_size);
TrainSample make_rf_sample(const KnowledgeBase& kb, int answer_index);

// Per-panel feature vectors used by the RF-monolithic ablation.
std::vector<double> rf_panel_vector(const RelationalFeatures& rf);

// Mean angular gap between consecutive question rotations exceeding this
// marks the rotation feature as "varying" in the classifier cascade.
inline constexpr double kRotationVaryTolerance = 2.0;

}  // namespace dr
