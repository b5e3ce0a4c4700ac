#include "spherelab/scalefit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace spherelab::scalefit {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

template <typename F>
double golden_minimize(F f, double lo, double hi, double tol, int max_iters = 400) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < max_iters && (b - a) > tol; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

struct CenteredPowerFit {
    double slope = 0.0;     // s in y ~ A_c * exp(s * (ln x - mean))
    double amp_c = 0.0;     // A_c
    double ssr = 0.0;
};

// For a fixed slope the optimal amplitude is closed-form; SSR(slope) is then
// minimized by a coarse scan plus golden-section refinement.
CenteredPowerFit fit_centered(std::span<const double> lx, std::span<const double> y) {
    const size_t n = lx.size();

    auto amp_ssr = [&](double s) -> std::pair<double, double> {
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double e = std::exp(s * lx[i]);
            num += y[i] * e;
            den += e * e;
        }
        const double a = den > 0 ? num / den : 0.0;
        double ssr = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double r = y[i] - a * std::exp(s * lx[i]);
            ssr += r * r;
        }
        return {a, ssr};
    };
    auto ssr_of = [&](double s) { return amp_ssr(s).second; };

    // Log-log regression seed.
    double sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double ly = std::log(y[i]);
        sx += lx[i];
        sxx += lx[i] * lx[i];
        sy += ly;
        sxy += lx[i] * ly;
    }
    const double denom = n * sxx - sx * sx;
    const double seed = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;

    const double half_width = 2.0 + 2.0 * std::abs(seed);
    double best_s = seed, best_v = ssr_of(seed);
    const int kScan = 81;
    for (int i = 0; i < kScan; ++i) {
        const double s = seed - half_width + 2.0 * half_width * i / (kScan - 1);
        const double v = ssr_of(s);
        if (v < best_v) {
            best_v = v;
            best_s = s;
        }
    }
    const double step = 2.0 * half_width / (kScan - 1);
    const double s_opt = golden_minimize(ssr_of, best_s - step, best_s + step,
                                         1e-13 * std::max(1.0, std::abs(best_s)));

    auto [amp, ssr] = amp_ssr(s_opt);
    return {s_opt, amp, ssr};
}

PowerFit fit_floorless(std::span<const XY> points) {
    const size_t n = points.size();
    std::vector<double> lx(n), y(n);
    double mean_lx = 0.0;
    for (size_t i = 0; i < n; ++i) {
        require(points[i].x > 0 && points[i].y > 0, "fit_power_law: x and y must be positive");
        lx[i] = std::log(points[i].x);
        mean_lx += lx[i];
    }
    mean_lx /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        lx[i] -= mean_lx;
        y[i] = points[i].y;
    }
    CenteredPowerFit c = fit_centered(lx, y);
    PowerFit fit;
    fit.exponent = -c.slope;                              // y = A x^(-b)
    fit.amplitude = c.amp_c * std::exp(-c.slope * mean_lx);
    fit.floor = 0.0;
    fit.residual = c.ssr;
    return fit;
}

}  // namespace

QuadFit try_fit_quadratic_loglr(std::span<const SweepPoint> points) {
    // Collapse duplicate lrs to their mean loss.
    std::map<double, std::pair<double, int>> grouped;
    for (const auto& p : points) {
        require(std::isfinite(p.lr) && std::isfinite(p.loss), "fit_quadratic_loglr: non-finite point");
        require(p.lr > 0, "fit_quadratic_loglr: lr must be positive");
        auto& g = grouped[p.lr];
        g.first += p.loss;
        g.second += 1;
    }
    require(grouped.size() >= 3, "fit_quadratic_loglr: need at least 3 distinct lrs");

    std::vector<double> x, y;
    double lr_min = 0, lr_max = 0;
    for (const auto& [lr, acc] : grouped) {
        x.push_back(std::log(lr));
        y.push_back(acc.first / acc.second);
        if (lr_min == 0 || lr < lr_min) lr_min = lr;
        lr_max = std::max(lr_max, lr);
    }

    // Normal equations for y = a x^2 + b x + c, solved by Gaussian elimination.
    const size_t n = x.size();
    double m[3][4] = {};
    for (size_t i = 0; i < n; ++i) {
        const double xi = x[i], x2 = xi * xi;
        const double basis[3] = {x2, xi, 1.0};
        for (int r = 0; r < 3; ++r) {
            for (int col = 0; col < 3; ++col) m[r][col] += basis[r] * basis[col];
            m[r][3] += basis[r] * y[i];
        }
    }
    for (int p = 0; p < 3; ++p) {
        int piv = p;
        for (int r = p + 1; r < 3; ++r)
            if (std::abs(m[r][p]) > std::abs(m[piv][p])) piv = r;
        std::swap(m[p], m[piv]);
        require(m[p][p] != 0.0, "fit_quadratic_loglr: singular system");
        for (int r = 0; r < 3; ++r) {
            if (r == p) continue;
            const double f = m[r][p] / m[p][p];
            for (int col = p; col < 4; ++col) m[r][col] -= f * m[p][col];
        }
    }
    const double a = m[0][3] / m[0][0];
    const double b = m[1][3] / m[1][1];
    const double c = m[2][3] / m[2][2];

    QuadFit fit;
    fit.curvature = a;
    double ss_res = 0.0, ss_tot = 0.0, mean_y = 0.0;
    for (double yi : y) mean_y += yi;
    mean_y /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        const double pred = a * x[i] * x[i] + b * x[i] + c;
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    if (a > 0) {
        fit.has_minimum = true;
        fit.eta_star = std::exp(-b / (2.0 * a));
        fit.loss_star = c - b * b / (4.0 * a);
        fit.extrapolated = fit.eta_star < lr_min / 4.0 || fit.eta_star > lr_max * 4.0;
    }
    return fit;
}

QuadFit fit_quadratic_loglr(std::span<const SweepPoint> points) {
    QuadFit fit = try_fit_quadratic_loglr(points);
    if (!fit.has_minimum) throw NoInteriorMinimum(fit);
    return fit;
}

PowerFit fit_power_law(std::span<const XY> points, bool with_floor) {
    require(points.size() >= (with_floor ? 4u : 2u),
            with_floor ? "fit_power_law: need >= 4 points with a floor"
                       : "fit_power_law: need >= 2 points");
    for (const auto& p : points)
        require(p.x > 0 && p.y > 0 && std::isfinite(p.x) && std::isfinite(p.y),
                "fit_power_law: points must be positive and finite");
    if (!with_floor) return fit_floorless(points);

    double y_min = points[0].y;
    for (const auto& p : points) y_min = std::min(y_min, p.y);
    require(y_min > 0, "fit_power_law: floor search needs positive y");

    auto shifted_fit = [&](double c0) {
        std::vector<XY> shifted(points.begin(), points.end());
        for (auto& p : shifted) p.y -= c0;
        return fit_floorless(shifted);
    };
    auto ssr_of = [&](double c0) { return shifted_fit(c0).residual; };

    const double hi = 0.999 * y_min;
    // Coarse scan then golden-section to the 1e-10 bracket.
    const int kScan = 64;
    double best_c0 = 0.0, best_v = ssr_of(0.0);
    for (int i = 1; i < kScan; ++i) {
        const double c0 = hi * i / (kScan - 1);
        const double v = ssr_of(c0);
        if (v < best_v) {
            best_v = v;
            best_c0 = c0;
        }
    }
    const double step = hi / (kScan - 1);
    const double c0 = golden_minimize(ssr_of, std::max(0.0, best_c0 - step),
                                      std::min(hi, best_c0 + step), 1e-10);
    PowerFit fit = shifted_fit(c0);
    fit.floor = c0;
    return fit;
}

double cel(const PowerFit& baseline, double c_star, double l_star) {
    require(baseline.amplitude > 0 && baseline.exponent > 0,
            "cel: baseline must be a decaying power law");
    require(c_star > 0, "cel: c_star must be positive");
    if (l_star <= baseline.floor)
        throw std::invalid_argument("cel: loss below the baseline floor; leverage unbounded");
    const double c_base =
        std::pow(baseline.amplitude / (l_star - baseline.floor), 1.0 / baseline.exponent);
    return c_base / c_star;
}

ParamCount param_count(const model::ModelConfig& cfg) {
    ParamCount pc;
    for (const auto& s : model::param_specs(cfg)) {
        const long long n = static_cast<long long>(s.d_out) * s.d_in;
        switch (s.group) {
            case model::Group::EmbeddingVector: pc.embedding_vector += n; break;
            case model::Group::Unembedding: pc.unembedding += n; break;
            case model::Group::Hidden: pc.hidden += n; break;
        }
    }
    return pc;
}

double chinchilla_flops(const model::ModelConfig& cfg, double tokens, int context) {
    require(tokens > 0 && context > 0, "chinchilla_flops: tokens and context must be positive");
    const double matmul = 2.0 * static_cast<double>(model::active_matmul_params(cfg));
    const double qw = cfg.q_width();
    const double vw = static_cast<double>(cfg.heads()) * cfg.head_dim;
    const double attn = 2.0 * context * (qw + vw) * cfg.depth;
    return 3.0 * tokens * (matmul + attn);
}

SensitivityResult sensitivity(std::span<const SweepPoint> points, int k) {
    const int n = static_cast<int>(points.size());
    require(k >= 3 && k <= n, "sensitivity: need 3 <= k <= n");
    QuadFit full = fit_quadratic_loglr(points);

    SensitivityResult res;
    double lr_err = 0.0, loss_err = 0.0;
    long long used = 0;

    std::vector<int> pick(k);
    for (int i = 0; i < k; ++i) pick[i] = i;
    std::vector<SweepPoint> sub(k);
    while (true) {
        res.subsets_total += 1;
        for (int i = 0; i < k; ++i) sub[i] = points[pick[i]];
        QuadFit f = try_fit_quadratic_loglr(sub);
        if (!f.has_minimum) {
            res.subsets_no_minimum += 1;
        } else if (f.extrapolated) {
            res.subsets_extrapolated += 1;
        } else {
            lr_err += std::abs(f.eta_star - full.eta_star) / full.eta_star;
            loss_err += std::abs(f.loss_star - full.loss_star) / std::abs(full.loss_star);
            used += 1;
        }
        // next combination
        int i = k - 1;
        while (i >= 0 && pick[i] == n - k + i) --i;
        if (i < 0) break;
        pick[i] += 1;
        for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
    if (used > 0) {
        res.mean_lr_rel_err_pct = 100.0 * lr_err / used;
        res.mean_loss_rel_err_pct = 100.0 * loss_err / used;
    }
    return res;
}

double loo_cv_power(std::span<const XY> points) {
    require(points.size() >= 3, "loo_cv_power: need at least 3 points");
    double err = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
        std::vector<XY> rest;
        rest.reserve(points.size() - 1);
        for (size_t j = 0; j < points.size(); ++j)
            if (j != i) rest.push_back(points[j]);
        PowerFit f = fit_power_law(rest, false);
        const double pred = f.amplitude * std::pow(points[i].x, -f.exponent);
        err += std::abs(pred - points[i].y) / points[i].y;
    }
    return 100.0 * err / static_cast<double>(points.size());
}

namespace {

std::vector<std::pair<double, double>> read_two_columns(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open CSV file: " + path.string());
    std::vector<std::pair<double, double>> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a = 0, b = 0;
        if (ss >> a >> b) {
            out.emplace_back(a, b);
        } else {
            require(first, "malformed CSV row: " + line);  // allow one header row
        }
        first = false;
    }
    require(!out.empty(), "CSV file has no data rows: " + path.string());
    return out;
}

}  // namespace

std::vector<XY> read_xy_csv(const std::filesystem::path& path) {
    std::vector<XY> out;
    for (auto [a, b] : read_two_columns(path)) out.push_back({a, b});
    return out;
}

std::vector<SweepPoint> read_sweep_csv(const std::filesystem::path& path) {
    std::vector<SweepPoint> out;
    for (auto [a, b] : read_two_columns(path)) out.push_back({a, b});
    return out;
}

}  // namespace spherelab::scalefit
