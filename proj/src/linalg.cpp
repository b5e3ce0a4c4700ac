#include "spherelab/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace spherelab {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Mat::Mat(int r, int c, std::vector<double> vals) : rows(r), cols(c), v(std::move(vals)) {
    require(v.size() == static_cast<size_t>(r) * c, "Mat: value length does not match rows*cols");
}

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Mat Mat::filled(int r, int c, double x) {
    Mat m(r, c);
    std::fill(m.v.begin(), m.v.end(), x);
    return m;
}

Mat Mat::row_vector(std::span<const double> x) {
    Mat m(1, static_cast<int>(x.size()));
    std::copy(x.begin(), x.end(), m.v.begin());
    return m;
}

Mat Mat::col_vector(std::span<const double> x) {
    Mat m(static_cast<int>(x.size()), 1);
    std::copy(x.begin(), x.end(), m.v.begin());
    return m;
}

Mat matmul(const Mat& a, const Mat& b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ (" + std::to_string(a.cols) +
                                  " vs " + std::to_string(b.rows) + ")");
    Mat c(a.rows, b.cols);
    const int n = b.cols;
    // i-k-j order: unit-stride access on b and c rows.
    for (int i = 0; i < a.rows; ++i) {
        double* crow = c.row(i);
        const double* arow = a.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Mat add(const Mat& a, const Mat& b) {
    require(a.same_shape(b), "add: shape mismatch");
    Mat c = a;
    for (size_t i = 0; i < c.v.size(); ++i) c.v[i] += b.v[i];
    return c;
}

Mat sub(const Mat& a, const Mat& b) {
    require(a.same_shape(b), "sub: shape mismatch");
    Mat c = a;
    for (size_t i = 0; i < c.v.size(); ++i) c.v[i] -= b.v[i];
    return c;
}

Mat scale(const Mat& a, double s) {
    Mat c = a;
    for (double& x : c.v) x *= s;
    return c;
}

void axpy(double a, const Mat& x, Mat& y) {
    require(x.same_shape(y), "axpy: shape mismatch");
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += a * x.v[i];
}

double fdot(const Mat& a, const Mat& b) {
    require(a.same_shape(b), "fdot: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

Mat matvec_as_col(const Mat& a, std::span<const double> x) {
    require(a.cols == static_cast<int>(x.size()), "matvec: dimension mismatch");
    Mat y(a.rows, 1);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double s = 0.0;
        for (int j = 0; j < a.cols; ++j) s += arow[j] * x[j];
        y.at(i, 0) = s;
    }
    return y;
}

double frobenius_norm(const Mat& m) {
    require(!m.empty(), "frobenius_norm: empty matrix");
    double s = 0.0;
    for (double x : m.v) s += x * x;
    return std::sqrt(s);
}

double matrix_rms(const Mat& m) {
    require(!m.empty(), "matrix_rms: empty matrix");
    return frobenius_norm(m) / std::sqrt(static_cast<double>(m.rows) * m.cols);
}

double vector_rms(std::span<const double> x) {
    require(!x.empty(), "vector_rms: empty vector");
    double s = 0.0;
    for (double xi : x) s += xi * xi;
    return std::sqrt(s / static_cast<double>(x.size()));
}

SpectralEstimate spectral_norm(const Mat& m, int iters, double tol) {
    require(iters >= 1, "spectral_norm: iters must be >= 1");
    require(!m.empty(), "spectral_norm: empty matrix");

    // Power iteration on m^T m, deterministic start vector.
    std::vector<double> x(m.cols, 1.0 / std::sqrt(static_cast<double>(m.cols)));
    SpectralEstimate est;
    double prev = 0.0;
    for (int it = 0; it < iters; ++it) {
        std::vector<double> y(m.rows, 0.0);
        for (int i = 0; i < m.rows; ++i) {
            const double* row = m.row(i);
            double s = 0.0;
            for (int j = 0; j < m.cols; ++j) s += row[j] * x[j];
            y[i] = s;
        }
        std::vector<double> z(m.cols, 0.0);
        for (int i = 0; i < m.rows; ++i) {
            const double yi = y[i];
            const double* row = m.row(i);
            for (int j = 0; j < m.cols; ++j) z[j] += row[j] * yi;
        }
        double zn = 0.0;
        for (double zi : z) zn += zi * zi;
        zn = std::sqrt(zn);
        est.iters_used = it + 1;
        if (zn == 0.0) {
            est.value = 0.0;
            est.converged = true;
            return est;
        }
        est.value = std::sqrt(zn);  // ||m^T m x|| -> sigma_1^2 as x aligns
        for (size_t j = 0; j < z.size(); ++j) x[j] = z[j] / zn;
        if (it > 0 && std::abs(est.value - prev) <= tol * std::max(1.0, est.value)) {
            est.converged = true;
            return est;
        }
        prev = est.value;
    }
    est.converged = false;
    return est;
}

Mat newton_schulz_orthogonalize(const Mat& g, int steps) {
    require(steps >= 1, "newton_schulz_orthogonalize: steps must be >= 1");
    constexpr double kA = 3.4445;
    constexpr double kB = -4.7750;
    constexpr double kC = 2.0315;
    constexpr double kEps = 1e-7;

    double norm = 0.0;
    for (double x : g.v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return Mat::zeros(g.rows, g.cols);

    Mat x = scale(g, 1.0 / (norm + kEps));
    const bool tall = x.rows > x.cols;
    if (tall) x = transpose(x);

    for (int s = 0; s < steps; ++s) {
        Mat a = matmul(x, transpose(x));
        Mat b = add(scale(a, kB), scale(matmul(a, a), kC));
        x = add(scale(x, kA), matmul(b, x));
    }
    return tall ? transpose(x) : x;
}

Mat random_gaussian(Rng& rng, int r, int c) {
    Mat m(r, c);
    for (double& x : m.v) x = rng.gaussian();
    return m;
}

Mat random_uniform(Rng& rng, int r, int c, double lo, double hi) {
    Mat m(r, c);
    for (double& x : m.v) x = rng.uniform(lo, hi);
    return m;
}

}  // namespace spherelab
