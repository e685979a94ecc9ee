#include <cmath>
#include <random>

#include "doctest.h"
#include "pdfold/losses.hpp"
#include "pdfold/oracle.hpp"
#include "pdfold/ppnet.hpp"
#include "test_helpers.hpp"

using namespace pdfold;
using ad::Tape;
using ad::Var;

namespace {

const double kLn9 = std::log(9.0);

Mat symmetric_with(int L, double fill, std::vector<std::tuple<int, int, double>> cells) {
    Mat u = Mat::full(L, L, fill);
    for (const auto& [i, j, v] : cells) {
        u(i, j) = v;
        u(j, i) = v;
    }
    return u;
}

}  // namespace

TEST_CASE("default parameters") {
    PpParams p;
    CHECK(p.w == 1.0);
    CHECK(p.s == doctest::Approx(kLn9).epsilon(1e-15));
    CHECK(p.alpha == 0.01);
    CHECK(p.beta == 0.1);
    CHECK(p.gamma_alpha == 0.99);
    CHECK(p.gamma_beta == 0.99);
    CHECK(p.rho == 1.0);
    CHECK(p.unroll_depth == 20);
    CHECK_NOTHROW(p.validate());

    PpParams bad = p;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("initialization") {
    auto seq = RnaSequence::from_letters("GGGGAAAACCCC");
    auto mask = build_constraint_mask(seq);
    PpParams p;

    // scores exactly at the offset: the gate is 1/2 everywhere
    Mat at_s = Mat::full(12, 12, p.s);
    auto init = pp_init(at_s, mask, p, SignMode::kSoft);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) {
            CHECK(init.u_gated(i, j) == doctest::Approx(p.s / 2.0));
            const double sig = 1.0 / (1.0 + std::exp(-p.s));
            CHECK(init.state.ahat(i, j) == doctest::Approx(0.5 * sig));
        }

    // strongly negative scores vanish through the gate
    Mat low = Mat::full(12, 12, p.s - 50.0);
    auto init2 = pp_init(low, mask, p, SignMode::kSoft);
    CHECK(max_abs(init2.u_gated) < 1e-12);
    CHECK(max_abs(init2.state.ahat) < 1e-12);
    CHECK(max_abs(init2.state.lambda) == 0.0);

    // w = 0 silences the dual warm start even with saturated rows
    Mat high = Mat::full(12, 12, p.s + 50.0);
    PpParams w0 = p;
    w0.w = 0.0;
    auto init3 = pp_init(high, mask, w0, SignMode::kHard);
    CHECK(max_abs(init3.state.lambda) == 0.0);
    PpParams w1 = p;
    auto init4 = pp_init(high, mask, w1, SignMode::kHard);
    CHECK(max_abs(init4.state.lambda) > 0.0);
}

TEST_CASE("cell zero fixed point") {
    auto seq = RnaSequence::from_letters("GGGGAAAACCCC");
    auto mask = build_constraint_mask(seq);
    PpParams p;
    PpState st{Mat(12, 1), Mat(12, 12), Mat(12, 12), 0};
    Mat u_gated(12, 12);
    ppcell_step(st, u_gated, mask, p, SignMode::kSoft);
    CHECK(max_abs(st.ahat) == 0.0);
    CHECK(max_abs(st.a) == 0.0);
    CHECK(max_abs(st.lambda) == 0.0);
    CHECK(st.t == 1);
}

TEST_CASE("cell grows a dominant pair monotonically until the clip") {
    auto seq = RnaSequence::from_letters("GAAAAC");  // single admissible pair (0,5)
    auto mask = build_constraint_mask(seq);
    REQUIRE(sum(mask.entries) == 2.0);
    PpParams p;

    Mat u_gated = symmetric_with(6, 0.0, {{0, 5, 100.0}});
    PpState st;
    st.lambda = Mat(6, 1);
    st.ahat = symmetric_with(6, 0.0, {{0, 5, 0.1}});
    st.a = pair_transform(st.ahat, mask);
    st.t = 0;

    double prev = st.a(0, 5);
    bool reached_one = false;
    for (int step = 0; step < 20; ++step) {
        ppcell_step(st, u_gated, mask, p, SignMode::kSoft);
        CHECK(st.a(0, 5) >= prev - 1e-15);
        CHECK(st.a(0, 5) <= 1.0);
        prev = st.a(0, 5);
        if (st.a(0, 5) == 1.0) reached_one = true;
    }
    CHECK(reached_one);
    CHECK(st.a(0, 5) == 1.0);
}

TEST_CASE("dual update adds exactly the scaled violation") {
    auto seq = RnaSequence::from_letters("GAAAACAAAAAC");  // G0 pairs C5 and C11 only
    auto mask = build_constraint_mask(seq);
    REQUIRE(mask.entries(0, 5) == 1.0);
    REQUIRE(mask.entries(0, 11) == 1.0);
    REQUIRE(sum(mask.entries) == 4.0);

    PpParams p;
    p.rho = 0.0;  // keep ahat fixed through the threshold
    PpState st;
    st.lambda = Mat(12, 1);
    st.ahat = symmetric_with(12, 0.0, {{0, 5, 1.0}, {0, 11, 1.0}});
    st.a = pair_transform(st.ahat, mask);
    st.t = 0;
    REQUIRE(row_sums(st.a)(0, 0) == 2.0);

    Mat u_gated(12, 12);
    ppcell_step(st, u_gated, mask, p, SignMode::kSoft);
    CHECK(st.lambda(0, 0) == doctest::Approx(p.beta).epsilon(1e-15));  // beta * gamma^0 * 1
    CHECK(st.lambda(5, 0) == 0.0);
    CHECK(st.lambda(11, 0) == 0.0);
}

TEST_CASE("unroll on an all-zero mask returns a zero trajectory") {
    auto seq = RnaSequence::from_letters("AAAA");
    auto mask = build_constraint_mask(seq);
    PpParams p;
    auto traj = pp_unroll(Mat::full(4, 4, 10.0), mask, p);
    CHECK(traj.size() == 20);
    for (const auto& a : traj) CHECK(max_abs(a) == 0.0);
}

TEST_CASE("per-iteration invariants on random instances") {
    std::mt19937_64 rng(51);
    PpParams p;
    for (int trial = 0; trial < 25; ++trial) {
        const int L = 10 + static_cast<int>(rng() % 20);
        auto seq = testing::random_sequence(rng, L);
        auto mask = build_constraint_mask(seq);
        Mat u = testing::random_symmetric(rng, L, p.s - 2.0, p.s + 2.0);

        PpInit init = pp_init(u, mask, p, SignMode::kSoft);
        PpState st = std::move(init.state);
        Mat prev_lambda = st.lambda;
        for (int step = 0; step < p.unroll_depth; ++step) {
            ppcell_step(st, init.u_gated, mask, p, SignMode::kSoft);
            // the dual update consumes the A produced within the same cell
            const Mat rs_after = row_sums(st.a);
            for (int i = 0; i < L; ++i) {
                for (int j = 0; j < L; ++j) {
                    if (mask.entries(i, j) == 0.0) CHECK(st.a(i, j) == 0.0);  // mask absorption
                    CHECK(st.a(i, j) >= 0.0);  // box
                    CHECK(st.a(i, j) <= 1.0);
                    CHECK(st.ahat(i, j) == st.ahat(j, i));  // symmetry
                }
                CHECK(st.lambda(i, 0) >= 0.0);  // dual feasibility
                if (rs_after(i, 0) > 1.0)
                    CHECK(st.lambda(i, 0) > prev_lambda(i, 0));  // pressure monotonicity
            }
            prev_lambda = st.lambda;
        }
    }
}

TEST_CASE("plain and taped unrolls produce identical trajectories") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 10; ++trial) {
        const int L = 12;
        auto seq = testing::random_sequence(rng, L);
        auto mask = build_constraint_mask(seq);
        if (mask.all_zero()) continue;
        PpParams p;
        p.unroll_depth = 5;
        Mat u = testing::random_symmetric(rng, L, p.s - 2.0, p.s + 2.0);

        auto plain = pp_unroll(u, mask, p);

        Tape t;
        PpVars pv = lift_pp_params(t, p);
        auto taped = pp_unroll_tape(t, t.leaf(u), mask, pv, p);
        REQUIRE(plain.size() == taped.size());
        for (std::size_t k = 0; k < plain.size(); ++k)
            CHECK(max_abs_diff(plain[k], t.value(taped[k])) == 0.0);
    }
}

TEST_CASE("unroll decodes a hand-built two-pair landscape like the oracle") {
    auto seq = RnaSequence::from_letters("GGCGAAAACGCC");
    auto mask = build_constraint_mask(seq);
    REQUIRE(mask.entries(0, 11) == 1.0);
    REQUIRE(mask.entries(1, 10) == 1.0);
    PpParams p;
    Mat u = symmetric_with(12, 0.0, {{0, 11, 6.0}, {1, 10, 6.0}});

    auto traj = pp_unroll(u, mask, p);
    auto rounded = round_structure(traj.back(), mask, 0.5);
    auto pairs = matrix_to_pairs(rounded.entries);

    auto oracle = exact_decode(u, p.s, mask);
    CHECK(pairs == oracle.pairs);
    CHECK(pairs == PairSet::from_pairs({{0, 11}, {1, 10}}));
}

TEST_CASE("gradient through a short unroll matches finite differences") {
    std::mt19937_64 rng(71);
    auto seq = RnaSequence::from_letters("GGCGAAAACGCC");
    auto mask = build_constraint_mask(seq);
    Mat astar = pairs_to_matrix(PairSet::from_pairs({{0, 11}, {1, 10}}), 12);
    PpParams p;
    p.unroll_depth = 2;
    Mat u = testing::random_symmetric(rng, 12, p.s - 1.5, p.s + 1.5);

    auto loss_of = [&](Tape& t, Var uv, PpVars pv) {
        auto traj = pp_unroll_tape(t, uv, mask, pv, p);
        return trajectory_loss(traj, astar, 0.9);
    };

    // w.r.t. the score matrix
    double err_u = ad::check_gradient(
        [&](Tape& t, Var v) { return loss_of(t, v, lift_pp_params(t, p)); }, u, 1e-6);
    CHECK(err_u < 1e-4);

    // w.r.t. each learnable parameter
    auto check_param = [&](const char* name, auto assign) {
        double err = ad::check_gradient(
            [&](Tape& t, Var v) {
                PpVars pv = lift_pp_params(t, p);
                assign(pv, v);
                return loss_of(t, t.leaf(u), pv);
            },
            Mat::scalar(0.0), 1e-6);
        INFO(name);
        CHECK(err < 1e-4);
    };
    // evaluate at the defaults by adding the leaf offset onto each parameter
    check_param("w", [&](PpVars& pv, Var v) { pv.w = ad::add(pv.w, v); });
    check_param("s", [&](PpVars& pv, Var v) { pv.s = ad::add(pv.s, v); });
    check_param("alpha", [&](PpVars& pv, Var v) { pv.alpha = ad::add(pv.alpha, v); });
    check_param("beta", [&](PpVars& pv, Var v) { pv.beta = ad::add(pv.beta, v); });
    check_param("gamma_alpha", [&](PpVars& pv, Var v) { pv.gamma_alpha = ad::add(pv.gamma_alpha, v); });
    check_param("gamma_beta", [&](PpVars& pv, Var v) { pv.gamma_beta = ad::add(pv.gamma_beta, v); });
    check_param("rho", [&](PpVars& pv, Var v) { pv.rho = ad::add(pv.rho, v); });
}

TEST_CASE("convergent solver basics") {
    auto seq = RnaSequence::from_letters("GGGGAAAACCCC");
    auto mask = build_constraint_mask(seq);
    PpParams p;

    // dominant single entry
    Mat u = symmetric_with(12, 0.0, {{0, 11, 5.0}});
    auto solved = pp_solve_convergent(u, mask, p);
    auto oracle = exact_decode(u, p.s, mask);
    CHECK(solved.pairs == oracle.pairs);
    CHECK(solved.pairs == PairSet::from_pairs({{0, 11}}));
    CHECK(solved.converged);

    // no signal: scores exactly at the offset gate to nothing
    Mat flat = Mat::full(12, 12, p.s);
    auto empty = pp_solve_convergent(flat, mask, p);
    CHECK(empty.pairs.empty());
}

TEST_CASE("convergent solver recovers the crossing pair set") {
    auto seq = RnaSequence::from_letters("GAAAGAACCAACC");
    auto mask = build_constraint_mask(seq);
    PpParams p;
    p.s = 1.0;
    Mat u = symmetric_with(13, 0.0, {{0, 7, 6.0}, {4, 12, 6.0}, {0, 8, 5.0}, {4, 11, 5.0}});

    auto solved = pp_solve_convergent(u, mask, p);
    CHECK(solved.pairs == PairSet::from_pairs({{0, 7}, {4, 12}}));
    CHECK(is_pseudoknotted(solved.pairs));

    auto exact = exact_decode(u, p.s, mask);
    CHECK(exact.pairs == solved.pairs);
    auto nested = nested_decode(u, p.s, mask);
    CHECK(nested.objective < exact.objective);
}

TEST_CASE("objective value") {
    Mat zero(4, 4);
    CHECK(objective_value(zero, 0.0, zero, 1.0, zero) == 0.0);

    // one symmetric pair with u - s = 4, rho = 0: 0.5 * (4 + 4) = 4
    Mat u = symmetric_with(8, 1.0, {{0, 6, 5.0}});
    Mat a = symmetric_with(8, 0.0, {{0, 6, 1.0}});
    CHECK(objective_value(u, 1.0, a, 0.0, a) == doctest::Approx(4.0));

    // independent re-evaluation on a random instance
    std::mt19937_64 rng(81);
    Mat ru = testing::random_symmetric(rng, 6, -1.0, 1.0);
    Mat ra = testing::random_symmetric(rng, 6, 0.0, 1.0);
    Mat rh = testing::random_symmetric(rng, 6, -1.0, 1.0);
    const double s = 0.3, rho = 0.7;
    double expect = 0.0;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) expect += 0.5 * (ru(i, j) - s) * ra(i, j);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) expect -= rho * std::fabs(rh(i, j)) / 1.0;
    CHECK(objective_value(ru, s, ra, rho, rh) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("soft step approaches the hard step as temperature grows") {
    auto seq = RnaSequence::from_letters("GAAAACAAAAAC");
    auto mask = build_constraint_mask(seq);

    // one clearly violated row (sum 1.62) and clearly slack rows; no row sum
    // sits at the sign kink, and nothing saturates the clip
    PpParams base;
    base.rho = 0.0;
    auto make_state = [&]() {
        PpState st;
        st.lambda = Mat::full(12, 1, 0.5);
        st.ahat = symmetric_with(12, 0.0, {{0, 5, 0.9}, {0, 11, 0.9}});
        st.a = pair_transform(st.ahat, mask);
        st.t = 0;
        return st;
    };
    Mat u_gated = Mat::full(12, 12, 1.0);

    PpState hard = make_state();
    ppcell_step(hard, u_gated, mask, base, SignMode::kHard);

    double prev_err = 1e9;
    for (double k : {10.0, 100.0, 1000.0}) {
        PpParams p = base;
        p.temperature = k;
        PpState soft = make_state();
        ppcell_step(soft, u_gated, mask, p, SignMode::kSoft);
        const double err = std::max(max_abs_diff(soft.ahat, hard.ahat),
                                    max_abs_diff(soft.lambda, hard.lambda));
        CHECK(err < prev_err);
        prev_err = err;
    }
    CHECK(prev_err < 1e-3);
}
