#include <doctest.h>

#include <cmath>

#include "spherelab/model.hpp"
#include "spherelab/scalefit.hpp"

using namespace spherelab;
using namespace spherelab::model;

namespace {

ModelConfig desk_dense() {
    ModelConfig cfg;
    cfg.depth = 2;
    cfg.aspect_ratio = 16;
    cfg.head_dim = 8;
    cfg.kv_heads = 4;
    cfg.vocab = 64;
    cfg.context = 16;
    return cfg;
}

ModelConfig desk_moe() {
    ModelConfig cfg = desk_dense();
    MoeConfig moe;
    moe.sparsity = 2;
    moe.granularity = 2;
    moe.shared_expert = true;
    moe.sqrt_gate = true;
    moe.aux_weight = 0.1;
    cfg.moe = moe;
    return cfg;
}

// SwiGLU replica used as the oracle for expert outputs.
Mat swiglu_oracle(const Mat& x, const Mat& wg, const Mat& wu, const Mat& wd) {
    Mat a = matmul(x, transpose(wg));
    for (auto& v : a.v) v = v / (1.0 + std::exp(-v)) ;
    Mat b = matmul(x, transpose(wu));
    for (size_t i = 0; i < a.v.size(); ++i) a.v[i] *= b.v[i];
    return matmul(a, transpose(wd));
}

}  // namespace

TEST_CASE("build_params structure") {
    ModelConfig cfg = desk_dense();
    CHECK(cfg.width() == 32);
    CHECK(cfg.heads() == 4);

    ParamSet ps = build_params(cfg, 1);
    int unembed_count = 0;
    for (const auto& s : ps.specs)
        if (s.group == Group::Unembedding) ++unembed_count;
    CHECK(unembed_count == 1);

    // every spec has a value of the right shape
    for (const auto& s : ps.specs) {
        const Mat& m = ps.get(s.name);
        CHECK(m.rows == s.d_out);
        CHECK(m.cols == s.d_in);
    }

    // deterministic for a fixed seed
    ParamSet ps2 = build_params(cfg, 1);
    CHECK(ps2.get("L0.wq").v == ps.get("L0.wq").v);
    ParamSet ps3 = build_params(cfg, 2);
    CHECK(ps3.get("L0.wq").v != ps.get("L0.wq").v);
}

TEST_CASE("hidden init is Kaiming uniform") {
    ModelConfig cfg = desk_dense();
    cfg.depth = 4;
    cfg.aspect_ratio = 32;  // w = 128: plenty of entries
    ParamSet ps = build_params(cfg, 7);
    const Mat& w = ps.get("L0.mlp.wg");  // (512, 128): 65536 entries
    REQUIRE(w.size() >= 10000);
    double mean = 0.0;
    for (double x : w.v) mean += x;
    mean /= static_cast<double>(w.size());
    double var = 0.0;
    for (double x : w.v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(w.size());
    const double expected_std = 1.0 / std::sqrt(3.0 * w.cols);
    CHECK(std::abs(std::sqrt(var) - expected_std) / expected_std < 0.05);

    double max_abs = 0.0;
    for (double x : w.v) max_abs = std::max(max_abs, std::abs(x));
    CHECK(max_abs <= 1.0 / std::sqrt(static_cast<double>(w.cols)) + 1e-12);
}

TEST_CASE("moe geometry") {
    ModelConfig cfg = desk_moe();  // S=2, k=2, shared
    CHECK(cfg.routed_pool() == 3);
    CHECK(cfg.route_select() == 1);

    ModelConfig no_shared = cfg;
    no_shared.moe->shared_expert = false;
    CHECK(no_shared.routed_pool() == 4);
    CHECK(no_shared.route_select() == 2);

    ModelConfig bad = cfg;
    bad.moe->granularity = 1;  // k-1 = 0 routed with a shared expert
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("active moe parameters match the dense model within 2 percent") {
    for (int k : {2, 4}) {
        ModelConfig dense;
        dense.depth = 2;
        dense.aspect_ratio = 16;
        ModelConfig moe = dense;
        MoeConfig mc;
        mc.sparsity = 2;
        mc.granularity = k;
        mc.shared_expert = true;
        moe.moe = mc;
        const double a = static_cast<double>(active_matmul_params(moe));
        const double d = static_cast<double>(active_matmul_params(dense));
        CHECK(std::abs(a - d) / d < 0.02);
    }
}

TEST_CASE("attention on a single token is the v-projection") {
    ModelConfig cfg = desk_dense();
    cfg.attn.gated = false;
    cfg.attn.qk_norm = false;
    cfg.rotary = false;
    ParamSet ps = build_params(cfg, 3);

    Rng rng(4);
    Mat x = random_gaussian(rng, 1, cfg.width());
    AttentionResult res = attention_forward(x, ps, cfg, 0);

    // softmax over one key = 1, so ctx = per-head slices of v = x Wv^T,
    // heads share kv groups, concatenated then projected by wo.
    Mat v = matmul(x, transpose(ps.get("L0.wv")));
    Mat ctx(1, cfg.q_width());
    const int group = cfg.heads() / cfg.kv_heads;
    for (int h = 0; h < cfg.heads(); ++h)
        for (int j = 0; j < cfg.head_dim; ++j)
            ctx.at(0, h * cfg.head_dim + j) = v.at(0, (h / group) * cfg.head_dim + j);
    Mat expect = matmul(ctx, transpose(ps.get("L0.wo")));
    REQUIRE(res.y.cols == expect.cols);
    for (int j = 0; j < expect.cols; ++j)
        CHECK(res.y.at(0, j) == doctest::Approx(expect.at(0, j)).epsilon(1e-12));

    // causal score record: head 0 has one row with one entry
    CHECK(res.causal_score_rows.size() == static_cast<size_t>(cfg.heads()));
    CHECK(res.causal_score_rows[0].size() == 1);
    CHECK(res.causal_score_rows[0][0].size() == 1);
}

TEST_CASE("qk-norm bounds attention scores under huge projections") {
    ModelConfig cfg = desk_dense();
    cfg.attn.gated = false;
    cfg.rotary = false;
    cfg.attn.qk_norm = true;
    ParamSet ps = build_params(cfg, 5);
    for (auto& x : ps.get("L0.wq").v) x *= 1e6;
    for (auto& x : ps.get("L0.wk").v) x *= 1e6;

    Rng rng(6);
    Mat x = random_gaussian(rng, 5, cfg.width());
    AttentionResult res = attention_forward(x, ps, cfg, 0);
    // rms-normalized rows have norm sqrt(head_dim), so |q.k|/sqrt(hd) <= sqrt(hd)
    const double bound = std::sqrt(static_cast<double>(cfg.head_dim)) + 1e-9;
    for (const auto& head : res.causal_score_rows)
        for (const auto& row : head)
            for (double s : row) CHECK(std::abs(s) <= bound);
}

TEST_CASE("zeroed gate projection halves every head output") {
    ModelConfig cfg = desk_dense();
    cfg.rotary = false;
    ParamSet ps = build_params(cfg, 8);
    for (auto& x : ps.get("L0.wgate").v) x = 0.0;

    ModelConfig ungated = cfg;
    ungated.attn.gated = false;

    Rng rng(9);
    Mat x = random_gaussian(rng, 4, cfg.width());
    Mat gated = attention_forward(x, ps, cfg, 0).y;
    Mat plain = attention_forward(x, ps, ungated, 0).y;
    for (size_t i = 0; i < gated.v.size(); ++i)
        CHECK(gated.v[i] == doctest::Approx(0.5 * plain.v[i]).epsilon(1e-12));
}

TEST_CASE("router picks the lowest index on ties and soft-gates to 1") {
    ModelConfig cfg = desk_dense();
    MoeConfig mc;
    mc.sparsity = 2;
    mc.granularity = 1;  // pool 2, route 1, no shared
    mc.shared_expert = false;
    mc.sqrt_gate = false;
    cfg.moe = mc;
    cfg.validate();
    ParamSet ps = build_params(cfg, 11);
    for (auto& x : ps.get("L0.router").v) x = 0.0;  // all logits equal

    Rng rng(12);
    Mat x = random_gaussian(rng, 6, cfg.width());
    MoeResult res = moe_forward(x, ps, cfg, 0);
    CHECK(res.dispatch_counts[0] == 6);
    CHECK(res.dispatch_counts[1] == 0);

    // gate = softmax over one selected score = 1 -> y equals expert 0 exactly
    Mat e0 = swiglu_oracle(x, ps.get("L0.e0.wg"), ps.get("L0.e0.wu"), ps.get("L0.e0.wd"));
    for (size_t i = 0; i < e0.v.size(); ++i)
        CHECK(res.y.v[i] == doctest::Approx(e0.v[i]).epsilon(1e-12));
}

TEST_CASE("sqrt gate combines with the square roots of the selected softmax") {
    ModelConfig cfg = desk_dense();
    MoeConfig mc;
    mc.sparsity = 1;
    mc.granularity = 2;  // pool 2, route 2, no shared
    mc.shared_expert = false;
    mc.sqrt_gate = true;
    cfg.moe = mc;
    ParamSet ps = build_params(cfg, 13);

    // craft router so softmax(selected) = (0.75, 0.25): logit gap ln 3
    Mat& router = ps.get("L0.router");
    for (auto& v : router.v) v = 0.0;
    Mat x = Mat::zeros(1, cfg.width());
    x.at(0, 0) = 1.0;
    router.at(0, 0) = std::log(3.0);  // logit_0 = ln 3, logit_1 = 0

    MoeResult res = moe_forward(x, ps, cfg, 0);
    Mat e0 = swiglu_oracle(x, ps.get("L0.e0.wg"), ps.get("L0.e0.wu"), ps.get("L0.e0.wd"));
    Mat e1 = swiglu_oracle(x, ps.get("L0.e1.wg"), ps.get("L0.e1.wu"), ps.get("L0.e1.wd"));
    for (int j = 0; j < cfg.width(); ++j) {
        const double expect = std::sqrt(0.75) * e0.at(0, j) + std::sqrt(0.25) * e1.at(0, j);
        CHECK(res.y.at(0, j) == doctest::Approx(expect).epsilon(1e-9));
    }

    // uniform gates: combine weights sum of squares is 1
    router.at(0, 0) = 0.0;
    MoeResult uni = moe_forward(x, ps, cfg, 0);
    Mat expect_uni = scale(add(e0, e1), std::sqrt(0.5));
    for (int j = 0; j < cfg.width(); ++j)
        CHECK(uni.y.at(0, j) == doctest::Approx(expect_uni.at(0, j)).epsilon(1e-9));
}

TEST_CASE("shared expert adds the 1/sqrt(2) output multiplier") {
    ModelConfig cfg = desk_moe();  // pool 3, route 1, shared
    ParamSet ps = build_params(cfg, 17);
    Rng rng(18);
    Mat x = random_gaussian(rng, 3, cfg.width());
    MoeResult res = moe_forward(x, ps, cfg, 0);

    // reconstruct: for each token the routed expert output has gate 1
    Mat shared = swiglu_oracle(x, ps.get("L0.shared.wg"), ps.get("L0.shared.wu"),
                               ps.get("L0.shared.wd"));
    Mat logits = matmul(x, transpose(ps.get("L0.router")));
    for (int t = 0; t < x.rows; ++t) {
        int best = 0;
        for (int e = 1; e < cfg.routed_pool(); ++e)
            if (logits.at(t, e) > logits.at(t, best)) best = e;
        const std::string p = "L0.e" + std::to_string(best) + ".";
        Mat xt(1, cfg.width());
        for (int j = 0; j < cfg.width(); ++j) xt.at(0, j) = x.at(t, j);
        Mat eo = swiglu_oracle(xt, ps.get(p + "wg"), ps.get(p + "wu"), ps.get(p + "wd"));
        for (int j = 0; j < cfg.width(); ++j) {
            const double expect = (eo.at(0, j) + shared.at(t, j)) / std::sqrt(2.0);
            CHECK(res.y.at(t, j) == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("block is the identity when branch projections are zero") {
    for (bool moe : {false, true}) {
        ModelConfig cfg = moe ? desk_moe() : desk_dense();
        ParamSet ps = build_params(cfg, 19);
        for (int l = 0; l < cfg.depth; ++l) {
            const std::string p = "L" + std::to_string(l) + ".";
            for (auto& v : ps.get(p + "wo").v) v = 0.0;
            if (moe) {
                for (int e = 0; e < cfg.routed_pool(); ++e)
                    for (auto& v : ps.get(p + "e" + std::to_string(e) + ".wd").v) v = 0.0;
                for (auto& v : ps.get(p + "shared.wd").v) v = 0.0;
            } else {
                for (auto& v : ps.get(p + "mlp.wd").v) v = 0.0;
            }
        }
        Rng rng(20);
        Mat x = random_gaussian(rng, 5, cfg.width());
        Mat y = x;
        for (int l = 0; l < cfg.depth; ++l) y = block_forward(y, ps, cfg, l);
        for (size_t i = 0; i < x.v.size(); ++i) CHECK(y.v[i] == x.v[i]);
    }
}

TEST_CASE("residual multiplier per scheme") {
    ModelConfig cfg = desk_dense();
    cfg.depth = 8;
    cfg.scheme = Scheme::HyperP;
    CHECK(cfg.residual_multiplier() == doctest::Approx(0.25));
    cfg.scheme = Scheme::MuPpp;
    CHECK(cfg.residual_multiplier() == doctest::Approx(0.25));
    cfg.scheme = Scheme::MuP;
    CHECK(cfg.residual_multiplier() == 1.0);
}

TEST_CASE("lm_loss on zeroed head equals ln V") {
    ModelConfig cfg = desk_dense();
    ParamSet ps = build_params(cfg, 23);
    for (auto& v : ps.get("unembed").v) v = 0.0;
    std::vector<int> tokens(cfg.context + 1);
    Rng rng(24);
    for (auto& t : tokens) t = static_cast<int>(rng.uniform_int(0, cfg.vocab - 1));
    auto [loss, acts] = lm_loss(tokens, ps, cfg);
    CHECK(loss == doctest::Approx(std::log(static_cast<double>(cfg.vocab))).epsilon(1e-12));
    CHECK(acts.layers.size() == 2);
    CHECK(acts.lm_logits.rows == cfg.context);
}

TEST_CASE("lm_loss is finite and positive for random parameters") {
    ModelConfig cfg = desk_moe();
    ParamSet ps = build_params(cfg, 29);
    std::vector<int> tokens(cfg.context + 1);
    Rng rng(30);
    for (auto& t : tokens) t = static_cast<int>(rng.uniform_int(0, cfg.vocab - 1));
    auto [loss, acts] = lm_loss(tokens, ps, cfg);
    CHECK(std::isfinite(loss));
    CHECK(loss > 0.0);
    CHECK(acts.layers[0].dispatch_counts.size() == static_cast<size_t>(cfg.routed_pool()));
    long total = 0;
    for (long c : acts.layers[0].dispatch_counts) total += c;
    CHECK(total == cfg.context * cfg.route_select());
}

TEST_CASE("aux_balance_loss reference values") {
    // perfect balance: f = P = 1/N -> gamma
    const int n = 4;
    std::vector<long> counts(n, 10);
    Mat probs = Mat::filled(8, n, 1.0 / n);
    CHECK(aux_balance_loss(counts, probs, 0.1) == doctest::Approx(0.1).epsilon(1e-12));

    // everything to expert 0 with probability 1 -> gamma * N
    std::vector<long> hot(n, 0);
    hot[0] = 8;
    Mat phot = Mat::zeros(8, n);
    for (int t = 0; t < 8; ++t) phot.at(t, 0) = 1.0;
    CHECK(aux_balance_loss(hot, phot, 0.1) == doctest::Approx(0.4).epsilon(1e-12));

    // N=2, counts (3,1), P = (0.6, 0.4) -> 1.1 gamma
    std::vector<long> c2{3, 1};
    Mat p2(1, 2, {0.6, 0.4});
    CHECK(aux_balance_loss(c2, p2, 1.0) == doctest::Approx(1.1).epsilon(1e-12));

    std::vector<long> zeros{0, 0};
    CHECK_THROWS_AS(aux_balance_loss(zeros, p2, 1.0), std::invalid_argument);
}

TEST_CASE("aux loss is minimized at the uniform point for consistent routing") {
    // With the router probability mass matching the dispatch fractions
    // (P = f), gamma*N*sum f^2 is minimized exactly at the uniform point.
    const int n = 4;
    Mat probs = Mat::filled(6, n, 1.0 / n);
    std::vector<long> uniform(n, 3);
    const double at_uniform = aux_balance_loss(uniform, probs, 1.0);
    CHECK(at_uniform == doctest::Approx(1.0));
    Rng rng(31);
    for (int t = 0; t < 30; ++t) {
        std::vector<long> counts(n);
        long total = 0;
        for (auto& c : counts) {
            c = 1 + rng.uniform_int(0, 8);
            total += c;
        }
        Mat p(1, n);
        for (int j = 0; j < n; ++j) p.at(0, j) = static_cast<double>(counts[j]) / total;
        CHECK(aux_balance_loss(counts, p, 1.0) >= at_uniform - 1e-9);
    }
}

TEST_CASE("structural validation errors") {
    ModelConfig cfg = desk_dense();
    cfg.n_head = 6;
    cfg.kv_heads = 4;  // 6 % 4 != 0
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    ModelConfig ok = desk_dense();
    std::vector<int> one{1};
    ParamSet ps = build_params(ok, 1);
    CHECK_THROWS_AS(lm_loss(one, ps, ok), std::invalid_argument);
}
