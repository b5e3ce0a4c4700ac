#pragma once

#include <string>

namespace spherelab::hyperp {

enum class Scheme { MuP, MuPpp, HyperP };
enum class Group { EmbeddingVector, Unembedding, Hidden };

Scheme scheme_from_string(const std::string& s);
std::string to_string(Scheme s);

/// Per-parameter multipliers applied on top of the global learning rate,
/// base init std, residual branches, forward outputs and base weight decay.
struct Multipliers {
    double lr_mult = 1.0;
    double init_std_mult = 1.0;
    double res_mult = 1.0;
    double weight_mult = 1.0;  // output multiplier (e.g. 1/w on the unembedding)
    double weight_decay = 1.0; // multiplier on the base decay; 0 disables decay
};

/// The anchor where every multiplier is normalized to 1, so the base
/// learning rate is the literal rate at the smallest scale.
struct TransferAnchor {
    double eta0 = 0.0;   // base learning rate tuned at the anchor
    int d0 = 0;          // anchor depth
    double tokens0 = 0;  // anchor training tokens
    double batch0 = 0;   // anchor batch size (tokens)
    int w0 = 0;          // anchor width

    bool valid() const { return eta0 > 0 && d0 > 0 && tokens0 > 0 && batch0 > 0 && w0 > 0; }
};

struct ParamDims {
    int d_out = 0;
    int d_in = 0;
};

/// The scheme table, normalized at the anchor. d is model depth, w model
/// width, tokens the training-token budget of the run.
Multipliers multipliers(Scheme scheme, Group group, const ParamDims& dims, int w, int d,
                        double tokens, const TransferAnchor& anchor);

/// Transferred hidden-matrix learning rate: eta0 * sqrt(d0/d) * (T0/T)^0.32.
double transfer_lr(const TransferAnchor& anchor, int d, double tokens);

/// Fitted data-scaling law for the optimal learning rate: 24.27 * T^-0.320.
double eval_data_law(double tokens);

/// Fitted batch-size law for the optimal learning rate: 4.66e-6 * B^0.558.
double eval_batch_law(double batch_tokens);

constexpr double kDataLawAmplitude = 24.27;
constexpr double kDataLawExponent = 0.320;
constexpr double kBatchLawAmplitude = 4.66e-6;
constexpr double kBatchLawExponent = 0.558;

}  // namespace spherelab::hyperp
