#include "dr/seqnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dr/rng.hpp"

namespace dr {

namespace {

enum Gate { kInput = 0, kForget, kOutput, kCandidate };

// Offsets into the flat gate vector.
struct Layout {
    int input_dim;
    int hidden_dim;
    std::size_t gate_stride;  // H*(I+H+1)

    explicit Layout(const LstmParams& p)
        : input_dim(p.input_dim),
          hidden_dim(p.hidden_dim),
          gate_stride(static_cast<std::size_t>(p.hidden_dim) *
                      (p.input_dim + p.hidden_dim + 1)) {}

    std::size_t wx(int gate, int row, int col) const {
        return gate * gate_stride +
               static_cast<std::size_t>(row) * input_dim + col;
    }
    std::size_t wh(int gate, int row, int col) const {
        return gate * gate_stride +
               static_cast<std::size_t>(hidden_dim) * input_dim +
               static_cast<std::size_t>(row) * hidden_dim + col;
    }
    std::size_t bias(int gate, int row) const {
        return gate * gate_stride +
               static_cast<std::size_t>(hidden_dim) * (input_dim + hidden_dim) +
               static_cast<std::size_t>(row);
    }
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_model(const LstmModel& model) {
    if (model.gates.input_dim < 1 || model.gates.hidden_dim < 1 ||
        model.output_dim < 1)
        throw StructuralError("lstm: dimensions must be >= 1");
    if (model.gates.values.size() !=
        LstmParams::expected_count(model.gates.input_dim, model.gates.hidden_dim))
        throw StructuralError("lstm: gate parameter count does not match dims");
    std::size_t readout_count =
        static_cast<std::size_t>(model.output_dim) * (model.gates.hidden_dim + 1);
    if (model.readout.size() != readout_count)
        throw StructuralError("lstm: readout parameter count does not match dims");
}

struct StepTrace {
    std::vector<double> x, gi, gf, go, gc, c, tanh_c, h;
};

std::vector<StepTrace> run_forward(const LstmModel& model,
                                   const std::vector<std::vector<double>>& seq) {
    const Layout lay(model.gates);
    const int I = lay.input_dim;
    const int H = lay.hidden_dim;
    const std::vector<double>& p = model.gates.values;

    std::vector<StepTrace> trace;
    trace.reserve(seq.size());
    std::vector<double> h_prev(static_cast<std::size_t>(H), 0.0);
    std::vector<double> c_prev(static_cast<std::size_t>(H), 0.0);
    for (const std::vector<double>& x : seq) {
        if (static_cast<int>(x.size()) != I)
            throw StructuralError("lstm: input vector length != input_dim");
        StepTrace st;
        st.x = x;
        st.gi.resize(H);
        st.gf.resize(H);
        st.go.resize(H);
        st.gc.resize(H);
        st.c.resize(H);
        st.tanh_c.resize(H);
        st.h.resize(H);
        for (int r = 0; r < H; ++r) {
            double z[4] = {0, 0, 0, 0};
            for (int g = 0; g < 4; ++g) {
                double acc = p[lay.bias(g, r)];
                for (int col = 0; col < I; ++col)
                    acc += p[lay.wx(g, r, col)] * x[static_cast<std::size_t>(col)];
                for (int col = 0; col < H; ++col)
                    acc += p[lay.wh(g, r, col)] * h_prev[static_cast<std::size_t>(col)];
                z[g] = acc;
            }
            double gi = sigmoid(z[kInput]);
            double gf = sigmoid(z[kForget]);
            double go = sigmoid(z[kOutput]);
            double gc = std::tanh(z[kCandidate]);
            double c = gf * c_prev[static_cast<std::size_t>(r)] + gi * gc;
            double tc = std::tanh(c);
            st.gi[static_cast<std::size_t>(r)] = gi;
            st.gf[static_cast<std::size_t>(r)] = gf;
            st.go[static_cast<std::size_t>(r)] = go;
            st.gc[static_cast<std::size_t>(r)] = gc;
            st.c[static_cast<std::size_t>(r)] = c;
            st.tanh_c[static_cast<std::size_t>(r)] = tc;
            st.h[static_cast<std::size_t>(r)] = go * tc;
        }
        h_prev = st.h;
        c_prev = st.c;
        trace.push_back(std::move(st));
    }
    return trace;
}

std::vector<double> readout_of(const LstmModel& model,
                               const std::vector<double>& h) {
    const int H = model.gates.hidden_dim;
    const int O = model.output_dim;
    std::vector<double> y(static_cast<std::size_t>(O), 0.0);
    for (int k = 0; k < O; ++k) {
        double acc = model.readout[static_cast<std::size_t>(O) * H +
                                   static_cast<std::size_t>(k)];
        for (int r = 0; r < H; ++r)
            acc += model.readout[static_cast<std::size_t>(k) * H + r] *
                   h[static_cast<std::size_t>(r)];
        y[static_cast<std::size_t>(k)] = acc;
    }
    return y;
}

}  // namespace

LstmModel make_lstm(int input_dim, int hidden_dim, int output_dim,
                    std::uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1)
        throw StructuralError("lstm: dimensions must be >= 1");
    LstmModel model;
    model.gates.input_dim = input_dim;
    model.gates.hidden_dim = hidden_dim;
    model.gates.values.resize(LstmParams::expected_count(input_dim, hidden_dim));
    model.output_dim = output_dim;
    model.readout.resize(static_cast<std::size_t>(output_dim) * (hidden_dim + 1));

    Rng rng(seed);
    for (double& v : model.gates.values) v = rng.uniform(-0.08, 0.08);
    for (double& v : model.readout) v = rng.uniform(-0.08, 0.08);
    Layout lay(model.gates);
    for (int r = 0; r < hidden_dim; ++r)
        model.gates.values[lay.bias(kForget, r)] += 1.0;  // stable memory at init
    return model;
}

ForwardResult lstm_forward(const LstmModel& model,
                           const std::vector<std::vector<double>>& sequence) {
    check_model(model);
    std::vector<StepTrace> trace = run_forward(model, sequence);
    ForwardResult out;
    out.hidden_states.reserve(trace.size());
    for (const StepTrace& st : trace) out.hidden_states.push_back(st.h);
    std::vector<double> h_final(static_cast<std::size_t>(model.gates.hidden_dim),
                                0.0);
    if (!trace.empty()) h_final = trace.back().h;
    out.prediction = readout_of(model, h_final);
    return out;
}

double squared_error(const std::vector<double>& prediction,
                     const std::vector<double>& target) {
    if (prediction.size() != target.size())
        throw StructuralError("squared_error: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        double d = prediction[i] - target[i];
        acc += d * d;
    }
    return acc;
}

std::vector<double> lstm_backward(const LstmModel& model,
                                  const std::vector<std::vector<double>>& sequence,
                                  const std::vector<double>& target) {
    check_model(model);
    const Layout lay(model.gates);
    const int I = lay.input_dim;
    const int H = lay.hidden_dim;
    const int O = model.output_dim;
    if (static_cast<int>(target.size()) != O)
        throw StructuralError("lstm_backward: target length != output_dim");

    std::vector<StepTrace> trace = run_forward(model, sequence);
    std::vector<double> h_final(static_cast<std::size_t>(H), 0.0);
    if (!trace.empty()) h_final = trace.back().h;
    std::vector<double> y = readout_of(model, h_final);

    std::vector<double> grad(model.param_count(), 0.0);
    double* ggates = grad.data();
    double* gread = grad.data() + model.gates.values.size();

    // d loss / d y, for loss = sum (y - t)^2
    std::vector<double> dy(static_cast<std::size_t>(O));
    for (int k = 0; k < O; ++k)
        dy[static_cast<std::size_t>(k)] =
            2.0 * (y[static_cast<std::size_t>(k)] - target[static_cast<std::size_t>(k)]);

    std::vector<double> dh(static_cast<std::size_t>(H), 0.0);
    for (int k = 0; k < O; ++k) {
        for (int r = 0; r < H; ++r) {
            gread[static_cast<std::size_t>(k) * H + r] +=
                dy[static_cast<std::size_t>(k)] * h_final[static_cast<std::size_t>(r)];
            dh[static_cast<std::size_t>(r)] +=
                model.readout[static_cast<std::size_t>(k) * H + r] *
                dy[static_cast<std::size_t>(k)];
        }
        gread[static_cast<std::size_t>(O) * H + k] += dy[static_cast<std::size_t>(k)];
    }

    std::vector<double> dc(static_cast<std::size_t>(H), 0.0);
    const std::vector<double>& p = model.gates.values;
    for (int t = static_cast<int>(trace.size()) - 1; t >= 0; --t) {
        const StepTrace& st = trace[static_cast<std::size_t>(t)];
        const std::vector<double>* h_prev =
            t > 0 ? &trace[static_cast<std::size_t>(t - 1)].h : nullptr;
        const std::vector<double>* c_prev =
            t > 0 ? &trace[static_cast<std::size_t>(t - 1)].c : nullptr;

        std::vector<double> dz(static_cast<std::size_t>(H) * 4, 0.0);
        std::vector<double> dh_prev(static_cast<std::size_t>(H), 0.0);
        std::vector<double> dc_prev(static_cast<std::size_t>(H), 0.0);
        for (int r = 0; r < H; ++r) {
            std::size_t ri = static_cast<std::size_t>(r);
            double go = st.go[ri];
            double tc = st.tanh_c[ri];
            double dct = dc[ri] + dh[ri] * go * (1.0 - tc * tc);
            double dgo = dh[ri] * tc;
            double cp = c_prev ? (*c_prev)[ri] : 0.0;
            double dgf = dct * cp;
            double dgi = dct * st.gc[ri];
            double dgc = dct * st.gi[ri];
            dz[kInput * H + ri] = dgi * st.gi[ri] * (1.0 - st.gi[ri]);
            dz[kForget * H + ri] = dgf * st.gf[ri] * (1.0 - st.gf[ri]);
            dz[kOutput * H + ri] = dgo * go * (1.0 - go);
            dz[kCandidate * H + ri] = dgc * (1.0 - st.gc[ri] * st.gc[ri]);
            dc_prev[ri] = dct * st.gf[ri];
        }
        for (int g = 0; g < 4; ++g) {
            for (int r = 0; r < H; ++r) {
                double dzg = dz[static_cast<std::size_t>(g) * H + r];
                if (dzg == 0.0) continue;
                for (int col = 0; col < I; ++col)
                    ggates[lay.wx(g, r, col)] +=
                        dzg * st.x[static_cast<std::size_t>(col)];
                if (h_prev)
                    for (int col = 0; col < H; ++col)
                        ggates[lay.wh(g, r, col)] +=
                            dzg * (*h_prev)[static_cast<std::size_t>(col)];
                ggates[lay.bias(g, r)] += dzg;
                for (int col = 0; col < H; ++col)
                    dh_prev[static_cast<std::size_t>(col)] +=
                        p[lay.wh(g, r, col)] * dzg;
            }
        }
        dh = std::move(dh_prev);
        dc = std::move(dc_prev);
    }
    return grad;
}

double gradient_check(int input_dim, int hidden_dim, int output_dim,
                      int sequence_len, std::uint64_t seed) {
    LstmModel model = make_lstm(input_dim, hidden_dim, output_dim, seed);
    Rng rng(splitmix64(seed) ^ 0xABCDEF);
    std::vector<std::vector<double>> seq;
    for (int t = 0; t < sequence_len; ++t) {
        std::vector<double> x(static_cast<std::size_t>(input_dim));
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        seq.push_back(std::move(x));
    }
    std::vector<double> target(static_cast<std::size_t>(output_dim));
    for (double& v : target) v = rng.uniform(-1.0, 1.0);

    std::vector<double> analytic = lstm_backward(model, seq, target);

    auto loss_at = [&]() {
        return squared_error(lstm_forward(model, seq).prediction, target);
    };
    const double h = 1e-5;
    double max_rel = 0.0;
    std::size_t gate_count = model.gates.values.size();
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double* slot = i < gate_count ? &model.gates.values[i]
                                      : &model.readout[i - gate_count];
        double saved = *slot;
        *slot = saved + h;
        double up = loss_at();
        *slot = saved - h;
        double down = loss_at();
        *slot = saved;
        double numeric = (up - down) / (2.0 * h);
        double rel = std::abs(analytic[i] - numeric) /
                     std::max(1e-6, std::abs(analytic[i]) + std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

TrainResult train(LstmModel& model, const std::vector<TrainSample>& dataset,
                  const TrainConfig& cfg) {
    check_model(model);
    if (dataset.empty()) throw TrainingError("train: empty dataset");
    if (cfg.learning_rate <= 0.0)
        throw ConfigError("train: learning_rate must be positive");
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");

    Rng rng(cfg.seed);
    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::size_t gate_count = model.gates.values.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop = std::min(order.size(),
                                        start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<double> grad(model.param_count(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const TrainSample& sample =
                    dataset[static_cast<std::size_t>(order[k])];
                std::vector<double> g =
                    lstm_backward(model, sample.sequence, sample.target);
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
                epoch_loss += squared_error(
                    lstm_forward(model, sample.sequence).prediction,
                    sample.target);
            }
            double scale = 1.0 / static_cast<double>(stop - start);
            double norm2 = 0.0;
            for (double& g : grad) {
                g *= scale;
                norm2 += g * g;
            }
            double norm = std::sqrt(norm2);
            double clip = cfg.clip_norm > 0.0 && norm > cfg.clip_norm
                              ? cfg.clip_norm / norm
                              : 1.0;
            double step = cfg.learning_rate * clip;
            for (std::size_t i = 0; i < grad.size(); ++i) {
                double* slot = i < gate_count ? &model.gates.values[i]
                                              : &model.readout[i - gate_count];
                *slot -= step * grad[i];
            }
        }
        epoch_loss /= static_cast<double>(dataset.size());
        if (!std::isfinite(epoch_loss))
            throw TrainingError("train: loss diverged (non-finite) at epoch " +
                                std::to_string(epoch));
        result.loss_curve.push_back(epoch_loss);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[] = "drlstm";
constexpr int kVersion = 1;
}  // namespace

void save_model(const LstmModel& model, const std::string& path) {
    check_model(model);
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open for writing: " + path);
    file << kMagic << " " << kVersion << "\n";
    file << "input_dim " << model.gates.input_dim << "\n";
    file << "hidden_dim " << model.gates.hidden_dim << "\n";
    file << "output_dim " << model.output_dim << "\n";
    file << "layout gates[i,f,o,c:Wx,Wh,b]+readout[W,b]\n";
    file << "count " << model.param_count() << "\n";
    file.write(reinterpret_cast<const char*>(model.gates.values.data()),
               static_cast<std::streamsize>(model.gates.values.size() *
                                            sizeof(double)));
    file.write(reinterpret_cast<const char*>(model.readout.data()),
               static_cast<std::streamsize>(model.readout.size() *
                                            sizeof(double)));
    if (!file) throw DataError("write failed: " + path);
}

LstmModel load_model(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open checkpoint: " + path);
    std::string magic, layout_tag;
    int version = 0;
    LstmModel model;
    std::size_t count = 0;
    file >> magic >> version;
    if (magic != kMagic) throw DataError("not a checkpoint file: " + path);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " +
                        std::to_string(version) + " in " + path);
    std::string key;
    file >> key >> model.gates.input_dim;
    if (key != "input_dim") throw DataError("corrupt checkpoint header: " + path);
    file >> key >> model.gates.hidden_dim;
    if (key != "hidden_dim") throw DataError("corrupt checkpoint header: " + path);
    file >> key >> model.output_dim;
    if (key != "output_dim") throw DataError("corrupt checkpoint header: " + path);
    file >> key >> layout_tag;
    if (key != "layout") throw DataError("corrupt checkpoint header: " + path);
    file >> key >> count;
    if (key != "count") throw DataError("corrupt checkpoint header: " + path);
    file.get();  // newline before the binary block

    std::size_t gate_count = LstmParams::expected_count(model.gates.input_dim,
                                                        model.gates.hidden_dim);
    std::size_t readout_count = static_cast<std::size_t>(model.output_dim) *
                                (model.gates.hidden_dim + 1);
    if (count != gate_count + readout_count)
        throw DataError("checkpoint parameter count mismatch: " + path);
    model.gates.values.resize(gate_count);
    model.readout.resize(readout_count);
    file.read(reinterpret_cast<char*>(model.gates.values.data()),
              static_cast<std::streamsize>(gate_count * sizeof(double)));
    file.read(reinterpret_cast<char*>(model.readout.data()),
              static_cast<std::streamsize>(readout_count * sizeof(double)));
    if (!file) throw DataError("truncated checkpoint: " + path);
    check_model(model);
    return model;
}

// ---------------------------------------------------------------------------
// Feature encodings
// ---------------------------------------------------------------------------

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<double> encode_rho(double rho_deg) {
    double rad = rho_deg * kPi / 180.0;
    return {std::sin(rad), std::cos(rad)};
}

double decode_rho(const std::vector<double>& v) {
    if (v.size() != 2) throw StructuralError("decode_rho: expected (sin, cos)");
    double deg = std::atan2(v[0], v[1]) * 180.0 / kPi;
    deg = std::fmod(deg, 360.0);
    if (deg < 0.0) deg += 360.0;
    return deg;
}

double encode_chi(int count) { return count / 12.0; }

int decode_chi(double value) {
    return static_cast<int>(std::lround(value * 12.0));
}

double encode_sigma(SizeLabel label) { return ordinal(label) / 6.0; }

SizeLabel decode_sigma(double value) {
    int ord = static_cast<int>(std::lround(value * 6.0));
    return static_cast<SizeLabel>(std::clamp(ord, 0, kSizeLabelCount - 1));
}

}  // namespace dr
