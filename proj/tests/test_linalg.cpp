#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spherelab/linalg.hpp"

using namespace spherelab;

TEST_CASE("frobenius_norm on reference matrices") {
    CHECK(frobenius_norm(Mat::identity(2)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(frobenius_norm(Mat::zeros(3, 3)) == 0.0);
    Mat m(2, 2, {3, 4, 0, 0});
    CHECK(frobenius_norm(m) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK_THROWS_AS(frobenius_norm(Mat{}), std::invalid_argument);
}

TEST_CASE("frobenius_norm scales absolutely homogeneously") {
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        Mat m = random_gaussian(rng, 5, 7);
        const double c = rng.uniform(-3.0, 3.0);
        CHECK(frobenius_norm(scale(m, c)) ==
              doctest::Approx(std::abs(c) * frobenius_norm(m)).epsilon(1e-12));
    }
}

TEST_CASE("matrix_rms") {
    CHECK(matrix_rms(Mat::filled(2, 2, 1.0)) == doctest::Approx(1.0));
    CHECK(matrix_rms(Mat::identity(4)) == doctest::Approx(0.5));
    Mat m(2, 2, {3, 4, 0, 0});
    CHECK(matrix_rms(m) == doctest::Approx(2.5));
}

TEST_CASE("vector_rms") {
    std::vector<double> ones{1, 1, 1, 1};
    CHECK(vector_rms(ones) == doctest::Approx(1.0));
    std::vector<double> zeros(6, 0.0);
    CHECK(vector_rms(zeros) == 0.0);
    std::vector<double> v{3, 4};
    CHECK(vector_rms(v) == doctest::Approx(5.0 / std::sqrt(2.0)));
}

TEST_CASE("spectral_norm matches known largest singular values") {
    Mat d(2, 2, {3, 0, 0, 1});
    CHECK(spectral_norm(d).value == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(spectral_norm(Mat::identity(5)).value == doctest::Approx(1.0).epsilon(1e-9));

    // rank-1 u v^T has sigma_1 = ||u|| ||v||
    Mat u(3, 1, {2, 0, 0});
    Mat v(4, 1, {0, 3, 0, 0});
    Mat r1 = matmul(u, transpose(v));
    CHECK(spectral_norm(r1).value == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("spectral-frobenius sandwich on random matrices") {
    Rng rng(11);
    for (int t = 0; t < 30; ++t) {
        const int r = 3 + static_cast<int>(rng.uniform_int(0, 8));
        const int c = 3 + static_cast<int>(rng.uniform_int(0, 8));
        Mat m = random_gaussian(rng, r, c);
        const double sp = spectral_norm(m, 500, 1e-13).value;
        const double fr = frobenius_norm(m);
        CHECK(sp <= fr + 1e-9);
        CHECK(fr <= std::sqrt(static_cast<double>(std::min(r, c))) * sp + 1e-9);
    }
}

TEST_CASE("newton_schulz preserves orthogonal directions up to the hover band") {
    const double th = M_PI / 6.0;
    Mat q(2, 2, {std::cos(th), -std::sin(th), std::sin(th), std::cos(th)});
    Mat out = newton_schulz_orthogonalize(q);
    // The quintic iteration hovers around 1 instead of converging onto it, so
    // the output is s*Q with s in roughly [0.68, 1.21].
    const double s = out.at(0, 0) / q.at(0, 0);
    CHECK(s > 0.65);
    CHECK(s < 1.25);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(out.at(i, j) == doctest::Approx(s * q.at(i, j)).epsilon(1e-9));
    double max_abs = 0.0;
    for (size_t i = 0; i < out.v.size(); ++i)
        max_abs = std::max(max_abs, std::abs(out.v[i] - q.v[i]));
    CHECK(max_abs < 0.25);
}

TEST_CASE("newton_schulz zero maps to zero") {
    Mat out = newton_schulz_orthogonalize(Mat::zeros(4, 4));
    for (double x : out.v) CHECK(x == 0.0);
}

TEST_CASE("newton_schulz contracts singular values toward 1") {
    Mat d(2, 2, {2.0, 0, 0, 0.5});
    auto sv = testing::singular_values_jacobi(newton_schulz_orthogonalize(d));
    for (double s : sv) {
        CHECK(s >= 0.7);
        CHECK(s <= 1.3);
    }
}

TEST_CASE("newton_schulz keeps singular values in [0.3, 1.7] up to condition 100") {
    Rng rng(23);
    for (int t = 0; t < 25; ++t) {
        const int m = 4 + static_cast<int>(rng.uniform_int(0, 20));
        const int n = 4 + static_cast<int>(rng.uniform_int(0, 20));
        const int k = std::min(m, n);
        // Controlled spectrum: Q1 * diag(s) * Q2 with s log-spaced, cond <= 100.
        Mat q1 = newton_schulz_orthogonalize(random_gaussian(rng, m, k));
        Mat q2 = newton_schulz_orthogonalize(random_gaussian(rng, k, n));
        Mat d = Mat::zeros(k, k);
        for (int i = 0; i < k; ++i)
            d.at(i, i) = std::pow(100.0, -static_cast<double>(i) / std::max(1, k - 1));
        Mat a = matmul(q1, matmul(d, q2));
        auto sv = testing::singular_values_jacobi(newton_schulz_orthogonalize(a));
        for (double s : sv) {
            CHECK(s >= 0.3);
            CHECK(s <= 1.7);
        }
    }
}

TEST_CASE("matmul and transpose basics") {
    Mat a(2, 3, {1, 2, 3, 4, 5, 6});
    Mat b(3, 2, {7, 8, 9, 10, 11, 12});
    Mat c = matmul(a, b);
    CHECK(c.at(0, 0) == 58);
    CHECK(c.at(1, 1) == 154);
    Mat t = transpose(a);
    CHECK(t.rows == 3);
    CHECK(t.at(2, 1) == 6);
    CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
}
