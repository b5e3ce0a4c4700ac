#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace spherelab {

/// Dense row-major matrix, double precision. The universal tensor of the lab.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;  // length rows*cols, row-major

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
    Mat(int r, int c, std::vector<double> vals);

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat identity(int n);
    static Mat filled(int r, int c, double x);
    static Mat row_vector(std::span<const double> x);
    static Mat col_vector(std::span<const double> x);

    double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
    double* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }
    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// Elementwise / BLAS-1 style helpers. All shape mismatches throw std::invalid_argument.
Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);
Mat add(const Mat& a, const Mat& b);
Mat sub(const Mat& a, const Mat& b);
Mat scale(const Mat& a, double s);
void axpy(double a, const Mat& x, Mat& y);  // y += a*x
double fdot(const Mat& a, const Mat& b);    // Frobenius inner product <A,B>_F
Mat matvec_as_col(const Mat& a, std::span<const double> x);  // convenience a*x

double frobenius_norm(const Mat& m);
double matrix_rms(const Mat& m);
double vector_rms(std::span<const double> x);

struct SpectralEstimate {
    double value = 0.0;
    int iters_used = 0;
    bool converged = false;
};

/// Power-iteration estimate of the largest singular value.
SpectralEstimate spectral_norm(const Mat& m, int iters = 200, double tol = 1e-12);

/// Approximate matrix sign (semi-orthogonal factor) via the quintic
/// Newton-Schulz iteration with coefficients (3.4445, -4.7750, 2.0315).
/// The input is pre-scaled by 1/(||g||_F + 1e-7); all-zero input maps to
/// all-zero output. After the default 5 steps the singular values of a
/// well-conditioned input land in roughly [0.68, 1.21] (the iteration
/// hovers around 1 rather than converging onto it).
Mat newton_schulz_orthogonalize(const Mat& g, int steps = 5);

/// Seeded RNG used everywhere; all randomness flows from explicit seeds.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
    int64_t uniform_int(int64_t lo, int64_t hi) { return std::uniform_int_distribution<int64_t>(lo, hi)(gen_); }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

Mat random_gaussian(Rng& rng, int r, int c);
Mat random_uniform(Rng& rng, int r, int c, double lo, double hi);

}  // namespace spherelab
