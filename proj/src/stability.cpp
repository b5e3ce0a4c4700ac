#include "spherelab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spherelab::stability {

double log_sum_exp(std::span<const double> row) {
    if (row.empty()) throw std::invalid_argument("log_sum_exp: empty row");
    double mx = row[0];
    for (double z : row) mx = std::max(mx, z);
    double s = 0.0;
    for (double z : row) s += std::exp(z - mx);
    return mx + std::log(s);
}

double z_metric(const std::vector<std::vector<double>>& logit_rows) {
    if (logit_rows.empty()) throw std::invalid_argument("z_metric: no rows");
    double total = 0.0;
    for (const auto& row : logit_rows) {
        const double lse = log_sum_exp(row);
        total += lse * lse;
    }
    return total / static_cast<double>(logit_rows.size());
}

double output_rms(std::span<const Mat> branch_outputs) {
    if (branch_outputs.empty()) throw std::invalid_argument("output_rms: no layers");
    double acc = 0.0;
    for (const Mat& m : branch_outputs) acc += matrix_rms(m);
    return acc / static_cast<double>(branch_outputs.size());
}

double outlier_pct(std::span<const Mat> branch_outputs) {
    if (branch_outputs.empty()) throw std::invalid_argument("outlier_pct: no layers");
    double acc = 0.0;
    for (const Mat& m : branch_outputs) {
        if (m.cols < 2) throw std::invalid_argument("outlier_pct: per-token vectors need length >= 2");
        long long outliers = 0;
        for (int i = 0; i < m.rows; ++i) {
            const double* row = m.row(i);
            double mean = 0.0;
            for (int j = 0; j < m.cols; ++j) mean += row[j];
            mean /= m.cols;
            double var = 0.0;
            for (int j = 0; j < m.cols; ++j) var += (row[j] - mean) * (row[j] - mean);
            const double sd = std::sqrt(var / m.cols);  // population std
            if (sd == 0.0) continue;                    // constant token: no outliers
            for (int j = 0; j < m.cols; ++j)
                if (std::abs(row[j] - mean) > 5.0 * sd) ++outliers;
        }
        acc += 100.0 * static_cast<double>(outliers) / static_cast<double>(m.size());
    }
    return acc / static_cast<double>(branch_outputs.size());
}

double maxvio(std::span<const long> counts) {
    if (counts.empty()) throw std::invalid_argument("maxvio: no experts");
    long total = 0, mx = counts[0];
    for (long c : counts) {
        total += c;
        mx = std::max(mx, c);
    }
    if (total <= 0) throw std::invalid_argument("maxvio: zero total count");
    const double mean = static_cast<double>(total) / static_cast<double>(counts.size());
    return (static_cast<double>(mx) - mean) / mean;
}

}  // namespace spherelab::stability
