#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dr/core.hpp"
#include "dr/reasoner.hpp"

namespace dr {

inline constexpr int kManifestVersion = 1;

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

struct ProblemRecord {
    std::string id;
    ProblemSpace problem;
};

struct CorpusManifest {
    int format_version = kManifestVersion;
    std::uint64_t seed = 0;
    int panel_size = 0;
    std::vector<ProblemRecord> problems;

    std::array<int, kCategoryCount> category_counts() const;
};

CorpusManifest corpus_from_problems(std::vector<ProblemSpace> problems,
                                    std::uint64_t seed);

/// Manifest is a JSON document; panels are either sidecar PGM files next to
/// it (inline_panels = false) or base64 PGM embedded in the manifest. Both
/// modes round-trip bit-exactly.
void save_corpus(const CorpusManifest& corpus, const std::string& path,
                 bool inline_panels);
CorpusManifest load_corpus(const std::string& path);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitResult {
    std::vector<int> train_indices;
    std::vector<int> test_indices;
    bool stratified = true;  // false when a category was too small
};

/// Stratified by true_category, deterministic given seed.
SplitResult split(const CorpusManifest& corpus, double train_fraction,
                  std::uint64_t seed);

/// Stratified k-fold assignment; fold ids 0..folds-1 per problem index.
std::vector<int> fold_assignment(const CorpusManifest& corpus, int folds,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Training orchestration
// ---------------------------------------------------------------------------

struct TrainSettings {
    std::uint64_t seed = 1;
    int cat1_hidden = 16;
    int cat1_epochs = 400;
    double cat1_lr = 0.08;
    int cat1_batch = 8;
    int image_hidden = 32;
    int image_epochs = 240;
    double image_lr = 0.06;
    int image_batch = 8;
    double clip_norm = 5.0;
    bool ablations = true;  // also fit the image-only and rf models
};

/// Fits the four category models (and the ablation models) on the given
/// corpus subset. Features come from the knowledge extractor, never from
/// ground-truth scenes; answer indices are training labels.
ModelSet train_models(const CorpusManifest& corpus,
                      const std::vector<int>& train_indices,
                      const SolverConfig& solver_cfg,
                      const TrainSettings& train_cfg);

void save_models(const ModelSet& models, const std::string& dir);
ModelSet load_models(const std::string& dir, bool need_ablations);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct DecisionRecord {
    std::string problem_id;
    Category true_category = Category::OT;
    Category detected_category = Category::OT;
    int chosen_option = 4;
    int answer_index = 4;
    bool correct = false;
    std::string predicted_knowledge;
};

struct FoldStats {
    int fold = 0;
    double accuracy = 0.0;
    std::array<double, kCategoryCount> per_category{};
    std::array<int, kCategoryCount> counts{};
};

struct EvalReport {
    std::array<std::array<int, kCategoryCount>, kCategoryCount> confusion{};
    std::array<double, kCategoryCount> per_category_accuracy{};
    std::array<int, kCategoryCount> per_category_count{};
    double mean_accuracy = 0.0;
    double detector_accuracy = -1.0;  // -1 when no scenes to score against
    std::vector<DecisionRecord> decisions;
    std::vector<FoldStats> folds;
    std::string config_echo;
};

/// Runs solve on every test problem; correctness is scored only after solve
/// returns. Worker count never changes the report bytes.
EvalReport evaluate(const CorpusManifest& corpus,
                    const std::vector<int>& test_indices,
                    const ModelSet& models, const SolverConfig& cfg,
                    int threads = 1);

/// Stratified k-fold cross validation: per fold, train the models on the
/// other folds and evaluate on the held-out one. The headline accuracy is
/// the unweighted mean of the fold accuracies.
EvalReport cross_validate(const CorpusManifest& corpus, int folds,
                          std::uint64_t seed, const SolverConfig& solver_cfg,
                          const TrainSettings& train_cfg, int threads = 1);

// ---------------------------------------------------------------------------
// Report serialization (text / JSON / CSV)
// ---------------------------------------------------------------------------

enum class ReportFormat { Text, Json, Csv };

ReportFormat report_format_from_string(const std::string& name);
std::string render_report(const EvalReport& report, ReportFormat format);
std::string render_decision(const DecisionRecord& record, ReportFormat format);

// ---------------------------------------------------------------------------
// Config file (--config): JSON overrides for solver and training settings
// ---------------------------------------------------------------------------

struct ToolConfig {
    SolverConfig solver;
    TrainSettings train;
};

ToolConfig load_tool_config(const std::string& path);

}  // namespace dr
