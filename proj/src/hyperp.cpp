#include "spherelab/hyperp.hpp"

#include <cmath>
#include <stdexcept>

namespace spherelab::hyperp {

Scheme scheme_from_string(const std::string& s) {
    if (s == "mup") return Scheme::MuP;
    if (s == "muppp") return Scheme::MuPpp;
    if (s == "hyperp") return Scheme::HyperP;
    throw std::invalid_argument("unknown scheme '" + s + "' (expected mup|muppp|hyperp)");
}

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::MuP: return "mup";
        case Scheme::MuPpp: return "muppp";
        case Scheme::HyperP: return "hyperp";
    }
    return "?";
}

Multipliers multipliers(Scheme scheme, Group group, const ParamDims& dims, int w, int d,
                        double tokens, const TransferAnchor& anchor) {
    if (dims.d_out <= 0 || dims.d_in <= 0 || w <= 0 || d <= 0 || tokens <= 0)
        throw std::invalid_argument("multipliers: dimensions must be positive");
    if (!anchor.valid()) throw std::invalid_argument("multipliers: invalid anchor");

    const double depth_lr = std::sqrt(static_cast<double>(anchor.d0) / d);
    const double width_wd = static_cast<double>(anchor.w0) / w;
    const double width_out = static_cast<double>(anchor.w0) / w;
    const double res_depth = 1.0 / std::sqrt(2.0 * d);

    Multipliers m;
    switch (group) {
        case Group::EmbeddingVector:
            switch (scheme) {
                case Scheme::MuP:
                    m = {1.0, 1.0, 1.0, 1.0, 1.0};
                    break;
                case Scheme::MuPpp:
                case Scheme::HyperP:
                    m = {depth_lr, 1.0, 1.0, 1.0, 0.0};
                    break;
            }
            break;
        case Group::Unembedding:
            switch (scheme) {
                case Scheme::MuP:
                    m = {1.0, 1.0, 1.0, width_out, 1.0};
                    break;
                case Scheme::MuPpp:
                    m = {depth_lr, 1.0, 1.0, width_out, 0.0};
                    break;
                case Scheme::HyperP:
                    m = {depth_lr, 1.0, 1.0, 1.0, 0.0};
                    break;
            }
            break;
        case Group::Hidden: {
            const double shape = std::sqrt(static_cast<double>(dims.d_out) / dims.d_in);
            switch (scheme) {
                case Scheme::MuP:
                    m = {shape, 1.0, 1.0, 1.0, width_wd};
                    break;
                case Scheme::MuPpp:
                    m = {shape * depth_lr, 1.0, res_depth, 1.0, width_wd};
                    break;
                case Scheme::HyperP:
                    m = {depth_lr * std::pow(anchor.tokens0 / tokens, kDataLawExponent),
                         1.0, res_depth, 1.0, 0.0};
                    break;
            }
            break;
        }
    }
    return m;
}

double transfer_lr(const TransferAnchor& anchor, int d, double tokens) {
    if (!anchor.valid()) throw std::invalid_argument("transfer_lr: invalid anchor");
    if (d <= 0 || tokens <= 0) throw std::invalid_argument("transfer_lr: d and tokens must be positive");
    return anchor.eta0 * std::sqrt(static_cast<double>(anchor.d0) / d) *
           std::pow(anchor.tokens0 / tokens, kDataLawExponent);
}

double eval_data_law(double tokens) {
    if (tokens <= 0) throw std::invalid_argument("eval_data_law: tokens must be positive");
    return kDataLawAmplitude * std::pow(tokens, -kDataLawExponent);
}

double eval_batch_law(double batch_tokens) {
    if (batch_tokens <= 0) throw std::invalid_argument("eval_batch_law: batch must be positive");
    return kBatchLawAmplitude * std::pow(batch_tokens, kBatchLawExponent);
}

}  // namespace spherelab::hyperp
