#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dr/core.hpp"

namespace dr {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// Gate parameters as one flat vector. Layout: for each gate in the order
// input, forget, output, candidate: W_x (hidden x input, row-major), then
// W_h (hidden x hidden), then bias (hidden). Total 4*H*(I+H+1).
struct LstmParams {
    int input_dim = 1;
    int hidden_dim = 1;
    std::vector<double> values;

    static std::size_t expected_count(int input_dim, int hidden_dim) {
        return 4u * static_cast<std::size_t>(hidden_dim) *
               (static_cast<std::size_t>(input_dim) + hidden_dim + 1);
    }
};

// Gates plus a linear readout of the final hidden state.
// Readout layout: W (output x hidden, row-major) then bias (output).
struct LstmModel {
    LstmParams gates;
    int output_dim = 1;
    std::vector<double> readout;

    std::size_t param_count() const {
        return gates.values.size() + readout.size();
    }
};

/// Uniform init in [-0.08, 0.08] from the seed, forget-gate bias +1.
LstmModel make_lstm(int input_dim, int hidden_dim, int output_dim,
                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct ForwardResult {
    std::vector<std::vector<double>> hidden_states;  // one per input step
    std::vector<double> prediction;                  // readout of final state
};

/// Standard LSTM recurrence (sigmoid gates, tanh candidate and output
/// squashing) from zero initial state. An empty sequence yields the readout
/// of the initial state. Throws StructuralError on dimension mismatch.
ForwardResult lstm_forward(const LstmModel& model,
                           const std::vector<std::vector<double>>& sequence);

/// Exact BPTT gradient of the squared-error loss sum_k (y_k - t_k)^2 with
/// respect to every parameter; layout matches [gates | readout].
std::vector<double> lstm_backward(const LstmModel& model,
                                  const std::vector<std::vector<double>>& sequence,
                                  const std::vector<double>& target);

double squared_error(const std::vector<double>& prediction,
                     const std::vector<double>& target);

/// Max relative error between lstm_backward and central finite differences
/// (h = 1e-5) on one randomly initialized configuration.
double gradient_check(int input_dim, int hidden_dim, int output_dim,
                      int sequence_len, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 200;
    int batch_size = 8;
    std::uint64_t seed = 1;
    double clip_norm = 5.0;
};

struct TrainSample {
    std::vector<std::vector<double>> sequence;
    std::vector<double> target;
};

struct TrainResult {
    std::vector<double> loss_curve;  // mean loss per epoch
};

/// Mini-batch SGD with global-norm gradient clipping; deterministic given
/// cfg.seed. Throws TrainingError when the loss stops being finite.
TrainResult train(LstmModel& model, const std::vector<TrainSample>& dataset,
                  const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoints: versioned flat parameter file, bit-exact round-trip
// ---------------------------------------------------------------------------

void save_model(const LstmModel& model, const std::string& path);
LstmModel load_model(const std::string& path);

// ---------------------------------------------------------------------------
// Relational-feature encodings for the sequence models
// ---------------------------------------------------------------------------

// rho enters as (sin, cos) to avoid the 360->0 wrap; chi as count/12;
// sigma as ordinal/6. Decoders invert (atan2 / rounding / nearest ordinal).
std::vector<double> encode_rho(double rho_deg);
double decode_rho(const std::vector<double>& v);
double encode_chi(int count);
int decode_chi(double value);
double encode_sigma(SizeLabel label);
SizeLabel decode_sigma(double value);

}  // namespace dr
