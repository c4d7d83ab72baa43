#include "dr/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dr/raster.hpp"
#include "dr/rng.hpp"

namespace dr {

namespace {

std::uint64_t problem_seed(const GeneratorSpec& spec, Category category,
                           std::uint64_t ordinal) {
    std::uint64_t h = splitmix64(spec.seed);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(category) + 1));
    h = splitmix64(h ^ (ordinal + 0x51ED270B));
    return h;
}

Scene rotate_scene(const Scene& scene, double theta_deg) {
    Scene out = scene;
    double rad = theta_deg * 3.14159265358979323846 / 180.0;
    double c = std::cos(rad);
    double s = std::sin(rad);
    for (Primitive& p : out.primitives) {
        double dx = p.cx - 0.5;
        double dy = p.cy - 0.5;
        p.cx = 0.5 + c * dx - s * dy;
        p.cy = 0.5 + s * dx + c * dy;
        p.rotation_deg = std::fmod(p.rotation_deg + theta_deg, 360.0);
        if (p.rotation_deg < 0.0) p.rotation_deg += 360.0;
    }
    return out;
}

double angular_distance(double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return std::min(d, 360.0 - d);
}

ProblemSpace assemble(Category category,
                      const std::array<Scene, kQuestionCount>& question,
                      const Scene& answer, std::vector<Scene> distractors,
                      Rng& rng) {
    if (distractors.size() != kOptionCount - 1)
        throw GenerationError("expected 3 distractor scenes");
    ProblemSpace p;
    p.true_category = category;
    int answer_slot = rng.uniform_int(0, kOptionCount - 1);
    p.answer_index = 4 + answer_slot;

    std::array<Scene, kPanelCount> scenes;
    for (int i = 0; i < kQuestionCount; ++i) scenes[i] = question[i];
    int d = 0;
    for (int slot = 0; slot < kOptionCount; ++slot)
        scenes[kQuestionCount + slot] =
            slot == answer_slot ? answer : distractors[d++];
    for (int i = 0; i < kPanelCount; ++i) p.panels[i] = rasterize(scenes[i]);
    p.scenes = scenes;

    // Distractors must stay visually distinct from the answer panel.
    const RasterImage& ans = p.panels[p.answer_index - 1];
    for (int slot = 0; slot < kOptionCount; ++slot) {
        if (slot == answer_slot) continue;
        if (similarity(p.panels[kQuestionCount + slot], ans) > 0.98)
            throw GenerationError("distractor nearly duplicates the answer");
    }
    return p;
}

// Kinds that stay reliably classifiable down to small packing sizes.
const std::vector<ShapeKind> kCompactKinds = {
    ShapeKind::Circle, ShapeKind::Triangle, ShapeKind::Square,
    ShapeKind::Diamond, ShapeKind::Rectangle};

// --- rotation problems -----------------------------------------------------

Scene rt_base_scene(const GeneratorSpec& spec, Rng& rng) {
    Scene base;
    base.width = base.height = spec.panel_size;

    Primitive main;
    std::vector<ShapeKind> kinds = kCompactKinds;
    kinds.push_back(ShapeKind::Star);
    main.kind = rng.pick(kinds);
    double lo = std::max(0.12, kind_min_size(main.kind));
    main.size = rng.uniform(lo, 0.155);
    main.cx = main.cy = 0.5;
    main.rotation_deg = rng.uniform(0.0, 360.0);
    main.filled = rng.coin();

    // Two satellites near the panel edge break any rotational self-symmetry
    // of the main shape. Their radius matters: peripheral ink moves the most
    // per degree, which is what makes the orbit's similarity peak sharp.
    double sep_px = 3.0 / spec.panel_size;
    double phi0 = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    double gap = rng.uniform(1.8, 4.4);  // radians between the satellites
    for (int s = 0; s < 2; ++s) {
        Primitive sat;
        sat.kind = rng.pick(kCompactKinds);
        sat.size = rng.uniform(0.08, 0.10);
        sat.filled = true;
        double hi_r = 0.5 - sat.size - 2.5 / spec.panel_size;
        double lo_r = main.size + sat.size + sep_px + 0.005;
        double r = s == 0 ? rng.uniform(hi_r - 0.012, hi_r)
                          : rng.uniform(hi_r - 0.05, hi_r - 0.038);
        if (r < lo_r) throw GenerationError("rt satellite does not fit");
        double phi = phi0 + s * gap;
        sat.cx = 0.5 + r * std::cos(phi);
        sat.cy = 0.5 + r * std::sin(phi);
        sat.rotation_deg = 0.0;
        base.primitives.push_back(sat);
    }
    base.primitives.insert(base.primitives.begin(), main);
    return base;
}

ProblemSpace generate_rt(const GeneratorSpec& spec, Rng& rng) {
    for (int attempt = 0; attempt < 24; ++attempt) {
        double delta = rng.pick(spec.rotation_steps);
        Scene base = rt_base_scene(spec, rng);
        double answer_rot = std::fmod(3.0 * delta, 360.0);

        // Verify the rasterization is asymmetric over the orbit.
        std::vector<double> orbit{0.0, delta, std::fmod(2.0 * delta, 360.0),
                                  answer_rot};
        std::vector<RasterImage> rasters;
        bool asymmetric = true;
        for (double a : orbit) rasters.push_back(rasterize(rotate_scene(base, a)));
        for (std::size_t i = 0; i < orbit.size() && asymmetric; ++i)
            for (std::size_t j = i + 1; j < orbit.size() && asymmetric; ++j)
                if (angular_distance(orbit[i], orbit[j]) > 2.0 &&
                    similarity(rasters[i], rasters[j]) > 0.95)
                    asymmetric = false;
        if (!asymmetric) continue;

        std::array<Scene, kQuestionCount> question = {
            rotate_scene(base, 0.0), rotate_scene(base, delta),
            rotate_scene(base, std::fmod(2.0 * delta, 360.0))};

        // Distractor rotations: distinct 45-degree multiples away from the
        // answer rotation.
        std::vector<double> pool;
        for (int k = 0; k < 8; ++k) {
            double a = 45.0 * k;
            if (angular_distance(a, answer_rot) > 2.0) pool.push_back(a);
        }
        rng.shuffle(pool);
        std::vector<Scene> distractors;
        for (int i = 0; i < 3; ++i)
            distractors.push_back(rotate_scene(base, pool[static_cast<std::size_t>(i)]));

        try {
            return assemble(Category::RT, question,
                            rotate_scene(base, answer_rot),
                            std::move(distractors), rng);
        } catch (const GenerationError&) {
            continue;  // near-duplicate distractor; redraw everything
        }
    }
    throw GenerationError("rt: no asymmetric base scene found");
}

// --- counting problems -----------------------------------------------------

Scene counting_scene(const GeneratorSpec& spec, ShapeKind kind, double size,
                     int count, Rng& rng) {
    Scene scene;
    scene.width = scene.height = spec.panel_size;
    int grid = 1;
    while (grid * grid < count) ++grid;
    std::vector<int> cells(static_cast<std::size_t>(grid) * grid);
    std::iota(cells.begin(), cells.end(), 0);
    rng.shuffle(cells);
    double cell = 1.0 / grid;
    double jitter = cell * 0.08;
    for (int i = 0; i < count; ++i) {
        int cidx = cells[static_cast<std::size_t>(i)];
        Primitive prim;
        prim.kind = kind;
        prim.size = size;
        prim.filled = true;
        prim.cx = (cidx % grid + 0.5) * cell + rng.uniform(-jitter, jitter);
        prim.cy = (cidx / grid + 0.5) * cell + rng.uniform(-jitter, jitter);
        prim.rotation_deg = 0.0;
        scene.primitives.push_back(prim);
    }
    return scene;
}

ProblemSpace generate_ct(const GeneratorSpec& spec, Rng& rng) {
    const CountProgressionRange& range = spec.count_progressions;
    int a = 0, d = 0;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 64)
            throw GenerationError("ct: no feasible count progression");
        a = rng.uniform_int(range.a_min, range.a_max);
        d = rng.uniform_int(range.d_min, range.d_max);
        if (a >= 1 && d >= 1 && a + 3 * d <= range.max_total) break;
    }
    int answer_count = a + 3 * d;

    std::vector<int> pool;
    for (int c = std::max(1, answer_count - 5);
         c <= std::min(range.max_total, answer_count + 5); ++c)
        if (c != answer_count) pool.push_back(c);
    rng.shuffle(pool);
    std::array<int, 3> distractor_counts = {pool[0], pool[1], pool[2]};

    int max_count = answer_count;
    for (int c : distractor_counts) max_count = std::max(max_count, c);
    int grid = 1;
    while (grid * grid < max_count) ++grid;
    // Largest circumradius that keeps jittered grid neighbors separated and
    // edge cells inside the panel.
    double cell = 1.0 / grid;
    double jitter = cell * 0.08;
    double cap_pair = (cell - 2.0 * jitter - 2.2 / spec.panel_size) / 2.0;
    double cap_edge = 0.5 * cell - jitter - 1.8 / spec.panel_size;
    double size_cap = std::min(cap_pair, cap_edge);

    std::vector<ShapeKind> kinds;
    for (ShapeKind k : kCompactKinds)
        if (kind_min_size(k) <= size_cap) kinds.push_back(k);
    if (kind_min_size(ShapeKind::Star) <= size_cap)
        kinds.push_back(ShapeKind::Star);
    if (kinds.empty()) throw GenerationError("ct: panel too small to pack");
    ShapeKind kind = rng.pick(kinds);
    double size = rng.uniform(std::max(kind_min_size(kind), size_cap - 0.015),
                              size_cap);

    std::array<Scene, kQuestionCount> question = {
        counting_scene(spec, kind, size, a, rng),
        counting_scene(spec, kind, size, a + d, rng),
        counting_scene(spec, kind, size, a + 2 * d, rng)};
    Scene answer = counting_scene(spec, kind, size, answer_count, rng);
    std::vector<Scene> distractors;
    for (int c : distractor_counts)
        distractors.push_back(counting_scene(spec, kind, size, c, rng));
    return assemble(Category::CT, question, answer,
                    std::move(distractors), rng);
}

// --- scaling problems ------------------------------------------------------

Scene scaling_scene(const GeneratorSpec& spec, ShapeKind kind, bool filled,
                    double size, Rng& rng) {
    Scene scene;
    scene.width = scene.height = spec.panel_size;
    if (size <= 0.0) return scene;  // Nil panel
    Primitive prim;
    prim.kind = kind;
    prim.filled = filled;
    prim.size = size;
    double wiggle = std::max(0.0, 0.5 - size - 3.0 / spec.panel_size);
    double j = std::min(0.03, wiggle);
    prim.cx = 0.5 + rng.uniform(-j, j);
    prim.cy = 0.5 + rng.uniform(-j, j);
    prim.rotation_deg = 0.0;
    scene.primitives.push_back(prim);
    return scene;
}

ProblemSpace generate_ss(const GeneratorSpec& spec, Rng& rng) {
    std::vector<ShapeKind> kinds = kCompactKinds;
    ShapeKind kind = rng.pick(kinds);
    bool filled = rng.coin();
    const std::array<double, 4>& ladder = spec.scale_ladder;

    std::array<Scene, kQuestionCount> question = {
        scaling_scene(spec, kind, filled, ladder[0], rng),
        scaling_scene(spec, kind, filled, ladder[1], rng),
        scaling_scene(spec, kind, filled, ladder[2], rng)};
    Scene answer = scaling_scene(spec, kind, filled, ladder[3], rng);

    // Distractors: three distinct picks from the question rungs plus a
    // blank (Nil) panel.
    std::vector<double> pool{ladder[0], ladder[1], ladder[2], 0.0};
    rng.shuffle(pool);
    std::vector<Scene> distractors;
    for (int i = 0; i < 3; ++i)
        distractors.push_back(
            scaling_scene(spec, kind, filled, pool[static_cast<std::size_t>(i)], rng));
    return assemble(Category::SS, question, answer,
                    std::move(distractors), rng);
}

// --- other-type problems ---------------------------------------------------

Scene placed_scene(const GeneratorSpec& spec, ShapeKind kind, bool filled,
                   double size, double cx, double cy) {
    Scene scene;
    scene.width = scene.height = spec.panel_size;
    Primitive prim;
    prim.kind = kind;
    prim.filled = filled;
    prim.size = size;
    prim.cx = cx;
    prim.cy = cy;
    prim.rotation_deg = 0.0;
    scene.primitives.push_back(prim);
    return scene;
}

ProblemSpace generate_ot_translation(const GeneratorSpec& spec, Rng& rng) {
    std::vector<ShapeKind> kinds = kCompactKinds;
    kinds.push_back(ShapeKind::Star);
    ShapeKind kind = rng.pick(kinds);
    double size = rng.uniform(std::max(0.10, kind_min_size(kind)), 0.13);
    double margin = size + 3.0 / spec.panel_size;
    double step = rng.coin() ? 0.125 : 0.1875;  // 2 or 3 pooled cells
    double x_lo = margin;
    double x_hi = 1.0 - margin - 3.0 * step;
    if (x_hi <= x_lo) throw GenerationError("ot: translation does not fit");
    double x0 = rng.uniform(x_lo, x_hi);
    double y = rng.uniform(0.42, 0.58);

    std::array<Scene, kQuestionCount> question = {
        placed_scene(spec, kind, true, size, x0, y),
        placed_scene(spec, kind, true, size, x0 + step, y),
        placed_scene(spec, kind, true, size, x0 + 2 * step, y)};
    Scene answer = placed_scene(spec, kind, true, size, x0 + 3 * step, y);

    // Wrong positions along the same track.
    std::vector<double> pool{x0, x0 + step, x0 + 2 * step, x0 + 3.5 * step};
    if (x0 + 3.5 * step + margin > 1.0) pool.back() = x0 + 2.5 * step;
    rng.shuffle(pool);
    std::vector<Scene> distractors;
    for (int i = 0; i < 3; ++i)
        distractors.push_back(placed_scene(spec, kind, true, size,
                                           pool[static_cast<std::size_t>(i)], y));
    return assemble(Category::OT, question, answer,
                    std::move(distractors), rng);
}

ProblemSpace generate_ot_alternation(const GeneratorSpec& spec, Rng& rng) {
    std::vector<ShapeKind> kinds = kCompactKinds;
    kinds.push_back(ShapeKind::Star);
    kinds.push_back(ShapeKind::Hexagon);
    ShapeKind kind = rng.pick(kinds);
    double lo = std::max(0.16, kind_min_size(kind));
    double size = rng.uniform(lo, lo + 0.06);
    double cx = 0.5 + rng.uniform(-0.02, 0.02);
    double cy = 0.5 + rng.uniform(-0.02, 0.02);
    bool first_filled = rng.coin();
    bool answer_filled = !first_filled;  // F,E,F -> E (or E,F,E -> F)

    std::array<Scene, kQuestionCount> question = {
        placed_scene(spec, kind, first_filled, size, cx, cy),
        placed_scene(spec, kind, !first_filled, size, cx, cy),
        placed_scene(spec, kind, first_filled, size, cx, cy)};
    Scene answer = placed_scene(spec, kind, answer_filled, size, cx, cy);

    std::vector<ShapeKind> others;
    for (ShapeKind k : kCompactKinds)
        if (k != kind) others.push_back(k);
    ShapeKind other = rng.pick(others);
    double other_size = std::max(size, kind_min_size(other));
    std::vector<Scene> distractors = {
        placed_scene(spec, kind, !answer_filled, size, cx, cy),
        placed_scene(spec, other, answer_filled, other_size, cx, cy),
        placed_scene(spec, other, !answer_filled, other_size, cx, cy)};
    return assemble(Category::OT, question, answer,
                    std::move(distractors), rng);
}

ProblemSpace generate_ot(const GeneratorSpec& spec, Rng& rng) {
    return rng.coin() ? generate_ot_translation(spec, rng)
                      : generate_ot_alternation(spec, rng);
}

}  // namespace

double kind_min_size(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Circle: return 0.075;
        case ShapeKind::Triangle: return 0.07;
        case ShapeKind::Rectangle: return 0.07;
        case ShapeKind::Square: return 0.07;
        case ShapeKind::Diamond: return 0.07;
        case ShapeKind::Star: return 0.105;
        case ShapeKind::Hexagon: return 0.28;
    }
    throw StructuralError("invalid ShapeKind value");
}

int GeneratorSpec::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0);
}

void validate(const GeneratorSpec& spec) {
    if (spec.panel_size < 32)
        throw ConfigError("generator: panel_size must be at least 32");
    for (int c : spec.counts)
        if (c < 0) throw ConfigError("generator: negative category count");
    if (spec.rotation_steps.empty())
        throw ConfigError("generator: rotation_steps must be non-empty");
    for (double s : spec.rotation_steps)
        if (s <= 2.0 || s >= 360.0)
            throw ConfigError("generator: rotation step out of (2,360)");
    const CountProgressionRange& r = spec.count_progressions;
    if (r.a_min < 1 || r.d_min < 1 || r.a_min > r.a_max || r.d_min > r.d_max)
        throw ConfigError("generator: bad count progression range");
    if (r.a_min + 3 * r.d_min > r.max_total)
        throw ConfigError("generator: count progressions infeasible");
    const auto& ladder = spec.scale_ladder;
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (ladder[i] >= ladder[i - 1])
            throw ConfigError("generator: scale_ladder must descend");
    if (ladder.front() > 0.46 || ladder.back() < 0.08)
        throw ConfigError("generator: scale_ladder out of usable range");
}

ProblemSpace generate_problem(const GeneratorSpec& spec, Category category,
                              std::uint64_t ordinal) {
    validate(spec);
    Rng rng(problem_seed(spec, category, ordinal));
    switch (category) {
        case Category::RT: return generate_rt(spec, rng);
        case Category::CT: return generate_ct(spec, rng);
        case Category::SS: return generate_ss(spec, rng);
        case Category::OT: return generate_ot(spec, rng);
    }
    throw StructuralError("invalid Category value");
}

std::vector<ProblemSpace> generate_corpus(const GeneratorSpec& spec) {
    validate(spec);
    std::vector<ProblemSpace> corpus;
    corpus.reserve(static_cast<std::size_t>(spec.total()));
    for (Category c : all_categories())
        for (int i = 0; i < spec.count_for(c); ++i)
            corpus.push_back(generate_problem(spec, c, static_cast<std::uint64_t>(i)));
    return corpus;
}

}  // namespace dr
