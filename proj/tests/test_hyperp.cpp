#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "spherelab/hyperp.hpp"

using namespace spherelab::hyperp;

namespace {

TransferAnchor anchor8() {
    TransferAnchor a;
    a.eta0 = 0.01515;
    a.d0 = 8;
    a.tokens0 = 10.4e9;
    a.batch0 = 2097152;
    a.w0 = 1024;
    return a;
}

}  // namespace

TEST_CASE("multipliers are normalized to 1 at the anchor") {
    TransferAnchor a = anchor8();
    Multipliers m = multipliers(Scheme::HyperP, Group::Hidden, {1024, 1024}, 1024, 8, a.tokens0, a);
    CHECK(m.lr_mult == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.weight_decay == 0.0);
    CHECK(m.weight_mult == 1.0);
}

TEST_CASE("scheme table cells") {
    TransferAnchor a = anchor8();

    Multipliers hyper_un = multipliers(Scheme::HyperP, Group::Unembedding, {32768, 1024}, 1024, 8,
                                       a.tokens0, a);
    CHECK(hyper_un.weight_mult == 1.0);
    CHECK(hyper_un.weight_decay == 0.0);

    // 1/w output multiplier for mup/mup++ unembedding, anchored at w0
    Multipliers mup_un =
        multipliers(Scheme::MuP, Group::Unembedding, {32768, 2048}, 2048, 16, a.tokens0, a);
    CHECK(mup_un.weight_mult == doctest::Approx(0.5));
    CHECK(mup_un.weight_decay == 1.0);

    // square hidden matrix under mup: shape factor 1
    Multipliers mup_sq = multipliers(Scheme::MuP, Group::Hidden, {512, 512}, 1024, 8, a.tokens0, a);
    CHECK(mup_sq.lr_mult == doctest::Approx(1.0));
    Multipliers mup_rect =
        multipliers(Scheme::MuP, Group::Hidden, {4096, 1024}, 1024, 8, a.tokens0, a);
    CHECK(mup_rect.lr_mult == doctest::Approx(2.0));

    // hidden weight decay scales exactly as 1/w between two widths under mup
    Multipliers wd_a = multipliers(Scheme::MuP, Group::Hidden, {64, 64}, 1024, 8, a.tokens0, a);
    Multipliers wd_b = multipliers(Scheme::MuP, Group::Hidden, {64, 64}, 2048, 16, a.tokens0, a);
    CHECK(wd_a.weight_decay / wd_b.weight_decay == doctest::Approx(2.0).epsilon(1e-12));

    // zero weight decay where the table says zero
    for (Group g : {Group::EmbeddingVector, Group::Unembedding, Group::Hidden}) {
        CHECK(multipliers(Scheme::HyperP, g, {64, 64}, 1024, 8, a.tokens0, a).weight_decay == 0.0);
    }
    CHECK(multipliers(Scheme::MuPpp, Group::EmbeddingVector, {64, 64}, 1024, 8, a.tokens0, a)
              .weight_decay == 0.0);
    CHECK(multipliers(Scheme::MuPpp, Group::Unembedding, {64, 64}, 1024, 8, a.tokens0, a)
              .weight_decay == 0.0);
    CHECK(multipliers(Scheme::MuPpp, Group::Hidden, {64, 64}, 1024, 8, a.tokens0, a).weight_decay >
          0.0);
}

TEST_CASE("residual multiplier satisfies res_mult * sqrt(2d) = 1 for depth-scaled schemes") {
    TransferAnchor a = anchor8();
    for (int d : {2, 8, 16, 24}) {
        Multipliers m = multipliers(Scheme::HyperP, Group::Hidden, {64, 64}, 128 * d, d, a.tokens0, a);
        CHECK(m.res_mult * std::sqrt(2.0 * d) == doctest::Approx(1.0).epsilon(1e-12));
    }
    Multipliers mup = multipliers(Scheme::MuP, Group::Hidden, {64, 64}, 1024, 8, a.tokens0, a);
    CHECK(mup.res_mult == 1.0);
}

TEST_CASE("transfer_lr") {
    TransferAnchor a = anchor8();
    CHECK(transfer_lr(a, a.d0, a.tokens0) == doctest::Approx(a.eta0).epsilon(1e-12));
    CHECK(transfer_lr(a, 4 * a.d0, a.tokens0) == doctest::Approx(a.eta0 / 2.0).epsilon(1e-12));

    // paper-scale spot check: d=8 fixed, tokens x16 -> 0.01515 * 16^-0.32,
    // within 3% of the independently fitted optimum 0.00635
    const double far = transfer_lr(a, 8, 166.4e9);
    CHECK(far == doctest::Approx(0.01515 * std::pow(16.0, -0.32)).epsilon(1e-12));
    CHECK(std::abs(far - 0.00635) / 0.00635 < 0.03);
}

TEST_CASE("transfer_lr is multiplicative along chains") {
    TransferAnchor a = anchor8();
    const double direct = transfer_lr(a, 32, 80e9);
    TransferAnchor mid = a;
    mid.d0 = 16;
    mid.tokens0 = 40e9;
    mid.eta0 = transfer_lr(a, 16, 40e9);
    const double chained = transfer_lr(mid, 32, 80e9);
    CHECK(chained == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("data law") {
    // fitted optimum at 10.4B tokens is 0.01515; the law lands within 1%
    CHECK(std::abs(eval_data_law(10.4e9) - 0.01515) / 0.01515 < 0.01);
    // at 166.4B the law predicts 0.00623, 1.9% from the tabulated fit 0.00635
    CHECK(eval_data_law(166.4e9) == doctest::Approx(0.0062279).epsilon(5e-4));
    CHECK(std::abs(eval_data_law(166.4e9) - 0.00635) / 0.00635 < 0.025);
    // power-law ratio: 10x tokens multiplies the rate by 10^-0.32
    CHECK(eval_data_law(1e10) / eval_data_law(1e9) ==
          doctest::Approx(std::pow(10.0, -0.32)).epsilon(1e-12));
}

TEST_CASE("batch law") {
    CHECK(std::abs(eval_batch_law(2097152.0) - 0.01562) / 0.01562 < 0.02);
    CHECK(std::abs(eval_batch_law(262144.0) - 0.00504) / 0.00504 < 0.03);
    CHECK(eval_batch_law(4.0 * 262144) / eval_batch_law(262144.0) ==
          doctest::Approx(std::pow(4.0, 0.558)).epsilon(1e-12));
}

TEST_CASE("argument validation") {
    TransferAnchor a = anchor8();
    CHECK_THROWS_AS(multipliers(Scheme::HyperP, Group::Hidden, {0, 4}, 32, 2, 1e9, a),
                    std::invalid_argument);
    CHECK_THROWS_AS(eval_data_law(0.0), std::invalid_argument);
    CHECK_THROWS_AS(scheme_from_string("adam"), std::invalid_argument);
    CHECK(scheme_from_string("muppp") == Scheme::MuPpp);
}
