#include "dr/core.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace dr {

std::string to_string(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Circle: return "circle";
        case ShapeKind::Triangle: return "triangle";
        case ShapeKind::Rectangle: return "rectangle";
        case ShapeKind::Square: return "square";
        case ShapeKind::Diamond: return "diamond";
        case ShapeKind::Star: return "star";
        case ShapeKind::Hexagon: return "hexagon";
    }
    throw StructuralError("invalid ShapeKind value");
}

ShapeKind shape_kind_from_string(const std::string& name) {
    for (ShapeKind k : all_shape_kinds()) {
        if (to_string(k) == name) return k;
    }
    throw StructuralError("unknown shape kind: " + name);
}

std::string to_string(Category c) {
    switch (c) {
        case Category::RT: return "rt";
        case Category::CT: return "ct";
        case Category::SS: return "ss";
        case Category::OT: return "ot";
    }
    throw StructuralError("invalid Category value");
}

Category category_from_string(const std::string& name) {
    for (Category c : all_categories()) {
        if (to_string(c) == name) return c;
    }
    throw StructuralError("unknown category: " + name);
}

std::string to_string(SizeLabel label) {
    switch (label) {
        case SizeLabel::Nil: return "nil";
        case SizeLabel::Tiny: return "tiny";
        case SizeLabel::Small: return "small";
        case SizeLabel::Normal: return "normal";
        case SizeLabel::Large: return "large";
        case SizeLabel::VeryLarge: return "verylarge";
    }
    throw StructuralError("invalid SizeLabel value");
}

SizeLabel size_label_from_string(const std::string& name) {
    for (int i = 0; i < kSizeLabelCount; ++i) {
        SizeLabel label = static_cast<SizeLabel>(i);
        if (to_string(label) == name) return label;
    }
    throw StructuralError("unknown size label: " + name);
}

bool RasterImage::blank() const {
    return std::all_of(pixels.begin(), pixels.end(),
                       [](std::uint8_t v) { return v >= 128; });
}

void validate(const ProblemSpace& p) {
    const RasterImage& first = p.panels[0];
    if (first.width <= 0 || first.height <= 0)
        throw StructuralError("panel 1 has empty dimensions");
    for (int i = 0; i < kPanelCount; ++i) {
        const RasterImage& img = p.panels[i];
        if (img.pixels.size() !=
            static_cast<std::size_t>(img.width) * img.height)
            throw StructuralError("panel " + std::to_string(i + 1) +
                                  " pixel buffer does not match dimensions");
        if (img.width != first.width || img.height != first.height)
            throw StructuralError("panel " + std::to_string(i + 1) +
                                  " dimensions differ from panel 1");
    }
    if (p.answer_index < 4 || p.answer_index > 7)
        throw StructuralError("answer_index must be in 4..7, got " +
                              std::to_string(p.answer_index));
}

SplitProblem split_problem(const ProblemSpace& p) {
    validate(p);
    SplitProblem out;
    for (int i = 0; i < kQuestionCount; ++i) out.question[i] = p.panels[i];
    for (int i = 0; i < kOptionCount; ++i)
        out.options[i] = p.panels[kQuestionCount + i];
    return out;
}

char option_letter(int answer_index) {
    if (answer_index < 4 || answer_index > 7)
        throw StructuralError("answer_index must be in 4..7");
    return static_cast<char>('A' + (answer_index - 4));
}

int RelationalFeatures::chi_total() const {
    return std::accumulate(chi.begin(), chi.end(), 0,
                           [](int acc, const auto& kv) { return acc + kv.second; });
}

namespace {

std::string rho_token(const std::optional<double>& rho) {
    if (!rho) return "NA";
    std::ostringstream os;
    double v = *rho;
    if (v == static_cast<long long>(v))
        os << static_cast<long long>(v);
    else
        os << v;
    os << "deg";
    return os.str();
}

}  // namespace

std::string KnowledgeBase::to_text() const {
    std::ostringstream os;
    os << "shapes: {";
    bool first = true;
    for (const auto& [kind, filled] : shapes) {
        if (!first) os << ", ";
        first = false;
        os << (filled ? "filled " : "") << to_string(kind);
    }
    os << "}\n";

    os << "rho: {";
    for (int i = 0; i < kPanelCount; ++i)
        os << (i ? ", " : "") << rho_token(per_panel[i].rho);
    os << "}\n";

    os << "chi: {";
    for (int i = 0; i < kPanelCount; ++i) {
        os << (i ? ", " : "") << "<";
        bool f = true;
        for (const auto& [kind, count] : per_panel[i].chi) {
            if (!f) os << ",";
            f = false;
            os << count;
        }
        if (per_panel[i].chi.empty()) os << "0";
        os << ">";
    }
    os << "}\n";

    os << "sigma: {";
    for (int i = 0; i < kPanelCount; ++i) {
        os << (i ? ", " : "") << "<";
        const auto& sigma = per_panel[i].sigma;
        if (sigma.empty()) {
            os << to_string(SizeLabel::Nil);
        } else {
            for (std::size_t j = 0; j < sigma.size(); ++j)
                os << (j ? "," : "") << to_string(sigma[j]);
        }
        os << ">";
    }
    os << "}\n";
    return os.str();
}

int choose_option(const std::array<double, kOptionCount>& scores) {
    int best = 0;
    for (int i = 1; i < kOptionCount; ++i)
        if (scores[i] > scores[best]) best = i;
    return best + 4;
}

}  // namespace dr
