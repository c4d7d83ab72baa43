#include "dr/reasoner.hpp"

#include <algorithm>
#include <cmath>

#include "dr/raster.hpp"

namespace dr {

namespace {

double angular_distance(double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return std::min(d, 360.0 - d);
}

// Panel sigma summary: mean label ordinal, Nil (0) for no detections.
double sigma_ordinal(const RelationalFeatures& rf) {
    if (rf.sigma.empty()) return 0.0;
    double acc = 0.0;
    for (SizeLabel l : rf.sigma) acc += ordinal(l);
    return acc / static_cast<double>(rf.sigma.size());
}

std::vector<SizeLabel> sorted_sigma(const RelationalFeatures& rf) {
    std::vector<SizeLabel> s = rf.sigma;
    std::sort(s.begin(), s.end());
    return s;
}

// Kind with the highest question count; carries the predicted count in chi.
ShapeKind dominant_kind(const KnowledgeBase& kb) {
    std::map<ShapeKind, int> totals;
    for (int i = 0; i < kQuestionCount; ++i)
        for (const auto& [kind, count] : kb.per_panel[i].chi)
            totals[kind] += count;
    ShapeKind best = ShapeKind::Circle;
    int best_count = -1;
    for (const auto& [kind, count] : totals) {
        if (count > best_count) {
            best = kind;
            best_count = count;
        }
    }
    return best;
}

double cosine_ink(const std::vector<double>& a, const std::vector<double>& b) {
    // Panels pool to mostly-background vectors; compare ink deviations
    // (1 - v) so the score reflects where ink is, not shared background.
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double ia = 1.0 - a[i];
        double ib = 1.0 - b[i];
        dot += ia * ib;
        na += ia * ia;
        nb += ib * ib;
    }
    if (na == 0.0 && nb == 0.0) return 1.0;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

void validate(const SolverConfig& cfg) {
    if (cfg.grid_size < 8) throw ConfigError("solver: grid_size must be >= 8");
    if (cfg.features.rotation_threshold <= 0.0 ||
        cfg.features.rotation_threshold > 1.0)
        throw ConfigError("solver: rotation threshold out of (0,1]");
}

const LstmModel& ModelSet::category1(Category c) const {
    switch (c) {
        case Category::RT: return rt;
        case Category::CT: return ct;
        case Category::SS: return ss;
        case Category::OT: break;
    }
    throw StructuralError("category1 model requested for OT");
}

Category classify(const KnowledgeBase& kb) {
    // Rotation: informative and varying across the question.
    bool rho_present = true;
    for (int i = 0; i < kQuestionCount; ++i)
        rho_present = rho_present && kb.per_panel[i].rho.has_value();
    if (rho_present) {
        double spread = 0.0;
        for (int i = 1; i < kQuestionCount; ++i)
            spread = std::max(spread,
                              angular_distance(*kb.per_panel[i].rho,
                                               *kb.per_panel[0].rho));
        if (spread > kRotationVaryTolerance) return Category::RT;
    }

    // Counting: per-kind count maps differ across the question.
    for (int i = 1; i < kQuestionCount; ++i)
        if (kb.per_panel[i].chi != kb.per_panel[0].chi) return Category::CT;

    // Scaling: informative size labels that differ across the question.
    if (kb.sigma_informative) {
        for (int i = 1; i < kQuestionCount; ++i)
            if (sorted_sigma(kb.per_panel[i]) != sorted_sigma(kb.per_panel[0]))
                return Category::SS;
    }
    return Category::OT;
}

Prediction predict_category1(const KnowledgeBase& kb, Category category,
                             const LstmModel& model, PredictorMode mode) {
    if (category == Category::OT)
        throw StructuralError("predict_category1: OT is not a category-1 type");

    RelationalFeatures predicted;
    if (mode == PredictorMode::Arithmetic) {
        // Linear extrapolation of the question progression.
        switch (category) {
            case Category::RT: {
                double r2 = kb.per_panel[1].rho.value_or(0.0);
                double r3 = kb.per_panel[2].rho.value_or(0.0);
                double next = std::fmod(2.0 * r3 - r2, 360.0);
                if (next < 0.0) next += 360.0;
                predicted.rho = next;
                break;
            }
            case Category::CT: {
                int c2 = kb.per_panel[1].chi_total();
                int c3 = kb.per_panel[2].chi_total();
                predicted.chi[dominant_kind(kb)] = std::max(0, 2 * c3 - c2);
                break;
            }
            default: {
                double o2 = sigma_ordinal(kb.per_panel[1]);
                double o3 = sigma_ordinal(kb.per_panel[2]);
                int ord = static_cast<int>(std::lround(2.0 * o3 - o2));
                predicted.sigma = {static_cast<SizeLabel>(
                    std::clamp(ord, 0, kSizeLabelCount - 1))};
                break;
            }
        }
    } else {
        std::vector<std::vector<double>> sequence;
        for (int i = 0; i < kQuestionCount; ++i) {
            const RelationalFeatures& rf = kb.per_panel[i];
            switch (category) {
                case Category::RT:
                    sequence.push_back(encode_rho(rf.rho.value_or(0.0)));
                    break;
                case Category::CT:
                    sequence.push_back({encode_chi(rf.chi_total())});
                    break;
                default:
                    sequence.push_back({sigma_ordinal(rf) / 6.0});
                    break;
            }
        }
        std::vector<double> out = lstm_forward(model, sequence).prediction;
        switch (category) {
            case Category::RT:
                predicted.rho = decode_rho(out);
                break;
            case Category::CT:
                predicted.chi[dominant_kind(kb)] = std::max(0, decode_chi(out[0]));
                break;
            default:
                predicted.sigma = {decode_sigma(out[0])};
                break;
        }
    }

    Prediction p;
    p.predicted_rf = std::move(predicted);
    return p;
}

Prediction predict_category2(const std::array<RasterImage, kPanelCount>& panels,
                             const LstmModel& model, int grid_size) {
    std::vector<std::vector<double>> sequence;
    for (int i = 0; i < kQuestionCount; ++i)
        sequence.push_back(mean_pool(panels[i], grid_size, grid_size));
    Prediction p;
    p.predicted_vector = lstm_forward(model, sequence).prediction;
    return p;
}

Prediction match(Prediction prediction, Category category,
                 const std::array<RasterImage, kPanelCount>& panels,
                 const KnowledgeBase& kb, int grid_size) {
    for (int opt = 0; opt < kOptionCount; ++opt) {
        const RelationalFeatures& rf = kb.per_panel[kQuestionCount + opt];
        double score = 0.0;
        if (prediction.predicted_vector.has_value()) {
            std::vector<double> v =
                mean_pool(panels[kQuestionCount + opt], grid_size, grid_size);
            score = cosine_ink(*prediction.predicted_vector, v);
        } else if (category == Category::RT) {
            double target = prediction.predicted_rf->rho.value_or(0.0);
            score = rf.rho ? -angular_distance(target, *rf.rho) : -360.0;
        } else if (category == Category::CT) {
            int target = prediction.predicted_rf->chi_total();
            score = -std::abs(target - rf.chi_total());
        } else {
            double target = sigma_ordinal(*prediction.predicted_rf);
            score = -std::abs(target - sigma_ordinal(rf));
        }
        prediction.score_per_option[static_cast<std::size_t>(opt)] = score;
    }
    prediction.chosen_option = choose_option(prediction.score_per_option);
    return prediction;
}

SolveRecord solve(const std::array<RasterImage, kPanelCount>& panels,
                  const ModelSet& models, const SolverConfig& cfg) {
    validate(cfg);
    KnowledgeBase kb = acquire_knowledge(panels, cfg.features);
    Category category = classify(kb);

    SolveRecord record;
    record.detected_category = category;

    Prediction prediction;
    switch (cfg.variant) {
        case SolverVariant::ImageOnly: {
            if (!models.image)
                throw ConfigError("solver: image-only variant needs an image model");
            prediction = predict_category2(panels, *models.image, cfg.grid_size);
            break;
        }
        case SolverVariant::RfMonolithic: {
            if (!models.rf)
                throw ConfigError("solver: rf variant needs an rf model");
            std::vector<std::vector<double>> sequence;
            for (int i = 0; i < kQuestionCount; ++i)
                sequence.push_back(rf_panel_vector(kb.per_panel[i]));
            prediction.predicted_vector =
                lstm_forward(*models.rf, sequence).prediction;
            // Match in RF space: negative distance to each option's vector.
            for (int opt = 0; opt < kOptionCount; ++opt) {
                std::vector<double> v =
                    rf_panel_vector(kb.per_panel[kQuestionCount + opt]);
                double d2 = 0.0;
                for (std::size_t i = 0; i < v.size(); ++i) {
                    double d = v[i] - (*prediction.predicted_vector)[i];
                    d2 += d * d;
                }
                prediction.score_per_option[static_cast<std::size_t>(opt)] =
                    -std::sqrt(d2);
            }
            prediction.chosen_option = choose_option(prediction.score_per_option);
            record.prediction = std::move(prediction);
            return record;
        }
        case SolverVariant::Full: {
            if (is_category1(category))
                prediction = predict_category1(kb, category,
                                               models.category1(category),
                                               cfg.predictor);
            else
                prediction = predict_category2(panels, models.ot, cfg.grid_size);
            break;
        }
    }
    record.prediction = match(std::move(prediction), category, panels, kb,
                              cfg.grid_size);
    return record;
}

TrainSample make_category1_sample(const KnowledgeBase& kb, Category category,
                                  int answer_index) {
    if (answer_index < 4 || answer_index > 7)
        throw StructuralError("make_category1_sample: bad answer index");
    const RelationalFeatures& answer = kb.per_panel[answer_index - 1];
    TrainSample sample;
    for (int i = 0; i < kQuestionCount; ++i) {
        const RelationalFeatures& rf = kb.per_panel[i];
        switch (category) {
            case Category::RT:
                sample.sequence.push_back(encode_rho(rf.rho.value_or(0.0)));
                break;
            case Category::CT:
                sample.sequence.push_back({encode_chi(rf.chi_total())});
                break;
            case Category::SS:
                sample.sequence.push_back({sigma_ordinal(rf) / 6.0});
                break;
            case Category::OT:
                throw StructuralError("make_category1_sample: OT routed here");
        }
    }
    switch (category) {
        case Category::RT:
            sample.target = encode_rho(answer.rho.value_or(0.0));
            break;
        case Category::CT:
            sample.target = {encode_chi(answer.chi_total())};
            break;
        default:
            sample.target = {sigma_ordinal(answer) / 6.0};
            break;
    }
    return sample;
}

TrainSample make_image_sample(const std::array<RasterImage, kPanelCount>& panels,
                              int answer_index, int grid_size) {
    if (answer_index < 4 || answer_index > 7)
        throw StructuralError("make_image_sample: bad answer index");
    TrainSample sample;
    for (int i = 0; i < kQuestionCount; ++i)
        sample.sequence.push_back(mean_pool(panels[i], grid_size, grid_size));
    sample.target = mean_pool(panels[answer_index - 1], grid_size, grid_size);
    return sample;
}

std::vector<double> rf_panel_vector(const RelationalFeatures& rf) {
    // (sin rho, cos rho, chi/12, sigma/6); NA rotation encodes as (0,0),
    // distinguishable from every unit-norm angle pair.
    std::vector<double> v(4, 0.0);
    if (rf.rho) {
        std::vector<double> sc = encode_rho(*rf.rho);
        v[0] = sc[0];
        v[1] = sc[1];
    }
    v[2] = encode_chi(rf.chi_total());
    v[3] = sigma_ordinal(rf) / 6.0;
    return v;
}

TrainSample make_rf_sample(const KnowledgeBase& kb, int answer_index) {
    if (answer_index < 4 || answer_index > 7)
        throw StructuralError("make_rf_sample: bad answer index");
    TrainSample sample;
    for (int i = 0; i < kQuestionCount; ++i)
        sample.sequence.push_back(rf_panel_vector(kb.per_panel[i]));
    sample.target = rf_panel_vector(kb.per_panel[answer_index - 1]);
    return sample;
}

}  // namespace dr
