#include <random>

#include "doctest.h"
#include "pdfold/evaluation.hpp"
#include "pdfold/losses.hpp"
#include "test_helpers.hpp"

using namespace pdfold;

TEST_CASE("prf on identical nonempty sets") {
    auto p = PairSet::from_pairs({{2, 9}, {3, 8}});
    for (bool shift : {false, true}) {
        auto m = prf(p, p, shift);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
}

TEST_CASE("one-position shift rule") {
    auto truth = PairSet::from_pairs({{10, 20}});
    auto pred = PairSet::from_pairs({{11, 20}});
    auto exact = prf(pred, truth, false);
    CHECK(exact.precision == 0.0);
    CHECK(exact.recall == 0.0);
    CHECK(exact.f1 == 0.0);
    auto shifted = prf(pred, truth, true);
    CHECK(shifted.precision == 1.0);
    CHECK(shifted.recall == 1.0);
    CHECK(shifted.f1 == 1.0);

    // a diagonal shift of both endpoints is not allowed
    auto diag = prf(PairSet::from_pairs({{11, 21}}), truth, true);
    CHECK(diag.f1 == 0.0);
}

TEST_CASE("shift hits are one-to-one") {
    auto truth = PairSet::from_pairs({{10, 20}, {11, 25}});
    auto pred = PairSet::from_pairs({{11, 20}});
    auto m = prf(pred, truth, true);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 0.5);
}

TEST_CASE("empty conventions") {
    CHECK(prf(PairSet(), PairSet(), false).f1 == 1.0);
    CHECK(prf(PairSet(), PairSet(), true).f1 == 1.0);
    auto truth = PairSet::from_pairs({{0, 9}});
    CHECK(prf(PairSet(), truth, false).f1 == 0.0);
    CHECK(prf(truth, PairSet(), false).f1 == 0.0);
}

TEST_CASE("shifted metrics dominate exact metrics") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int L = 10 + static_cast<int>(rng() % 30);
        auto seq = testing::random_sequence(rng, L);
        auto mask = build_constraint_mask(seq);
        auto truth = testing::random_matching(rng, mask, 0.4);
        auto pred = testing::random_matching(rng, mask, 0.4);
        CHECK(prf(pred, truth, true).f1 >= prf(pred, truth, false).f1 - 1e-12);
    }
}

TEST_CASE("greedy shift assignment matches maximum matching on small instances") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        const int L = 12 + static_cast<int>(rng() % 12);
        auto seq = testing::random_sequence(rng, L);
        auto mask = build_constraint_mask(seq);
        auto truth = testing::random_matching(rng, mask, 0.35);
        auto pred = testing::random_matching(rng, mask, 0.35);
        const auto m = prf(pred, truth, true);
        const int greedy_hits =
            pred.empty() ? 0 : static_cast<int>(std::lround(m.precision * pred.size()));
        const int best_hits = testing::max_shift_matching(pred, truth);
        CHECK(greedy_hits == best_hits);
    }
}

TEST_CASE("prf is invariant to simultaneous index relabeling") {
    auto truth = PairSet::from_pairs({{2, 9}, {4, 15}});
    auto pred = PairSet::from_pairs({{2, 9}, {5, 15}});
    auto before = prf(pred, truth, true);
    const int offset = 7;
    auto shift_all = [&](const PairSet& p) {
        std::vector<std::pair<int, int>> out;
        for (auto [i, j] : p.pairs()) out.emplace_back(i + offset, j + offset);
        return PairSet::from_pairs(out);
    };
    auto after = prf(shift_all(pred), shift_all(truth), true);
    CHECK(before.precision == after.precision);
    CHECK(before.recall == after.recall);
    CHECK(before.f1 == after.f1);
}

TEST_CASE("pseudoknot confusion") {
    auto nested = PairSet::from_pairs({{0, 10}, {1, 9}});
    auto knotted = PairSet::from_pairs({{0, 8}, {4, 12}});

    // all predictions nested, 3 of 5 truths pseudoknotted
    std::vector<PairSet> preds(5, nested);
    std::vector<PairSet> truths{knotted, knotted, knotted, nested, nested};
    auto c = pseudoknot_confusion(preds, truths);
    CHECK(c.tp == 0);
    CHECK(c.fn == 3);
    CHECK(c.tn == 2);
    CHECK(c.fp == 0);
    CHECK(c.tp + c.fp + c.tn + c.fn == 5);
    CHECK(c.set_count == 3);

    // perfect predictions
    auto c2 = pseudoknot_confusion(truths, truths);
    CHECK(c2.fp == 0);
    CHECK(c2.fn == 0);
    CHECK(c2.set_f1 == doctest::Approx(1.0));

    // a crossing prediction on a nested truth is a false positive
    auto c3 = pseudoknot_confusion({knotted}, {nested});
    CHECK(c3.fp == 1);

    CHECK_THROWS_AS(pseudoknot_confusion({nested}, {}), std::invalid_argument);
}

TEST_CASE("length weighted f1") {
    CHECK(length_weighted_f1({{50, 0.4}, {50, 0.8}}) == doctest::Approx(0.6));
    CHECK(length_weighted_f1({{10, 1.0}, {90, 0.0}}) == doctest::Approx(0.1));
    CHECK(length_weighted_f1({{33, 0.77}}) == doctest::Approx(0.77));
    CHECK_THROWS_AS(length_weighted_f1({}), std::invalid_argument);
}

TEST_CASE("per family report") {
    SeqEval a;
    a.family = "tRNA";
    a.exact.f1 = 0.2;
    SeqEval b;
    b.family = "5S";
    b.exact.f1 = 0.8;

    auto single = per_family_report({a});
    REQUIRE(single.size() == 1);
    CHECK(single[0].exact.f1 == doctest::Approx(0.2));

    auto both = per_family_report({a, b});
    REQUIRE(both.size() == 2);
    double mean = 0.0;
    for (const auto& row : both) mean += row.exact.f1;
    CHECK(mean / 2.0 == doctest::Approx(0.5));

    CHECK(per_family_report({}).empty());
}

TEST_CASE("continuous f1 surrogate equals the discrete metric on binary inputs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const int L = 10 + static_cast<int>(rng() % 20);
        auto seq = testing::random_sequence(rng, L);
        auto mask = build_constraint_mask(seq);
        auto truth = testing::random_matching(rng, mask, 0.5);
        if (truth.empty()) continue;
        auto pred = testing::random_matching(rng, mask, 0.5);
        const double surrogate = -f1_loss_value(pairs_to_matrix(pred, L), pairs_to_matrix(truth, L));
        const double metric = prf(pred, truth, false).f1;
        CHECK(std::fabs(surrogate - metric) < 1e-12);
    }
}

TEST_CASE("full report") {
    EvalInput a;
    a.id = "x";
    a.family = "tRNA";
    a.length = 20;
    a.pred = PairSet::from_pairs({{0, 10}});
    a.truth = PairSet::from_pairs({{0, 10}});
    EvalInput b;
    b.id = "y";
    b.family = "5S";
    b.length = 30;
    b.pred = PairSet();
    b.truth = PairSet::from_pairs({{1, 9}});

    auto report = evaluate({a, b});
    CHECK(report.per_seq.size() == 2);
    CHECK(report.exact_mean.f1 == doctest::Approx(0.5));
    CHECK(report.weighted_f1 == doctest::Approx(20.0 / 50.0));
    CHECK(report.families.size() == 2);
    CHECK(report.pk.tn == 2);

    auto text = format_report_text(report);
    CHECK(text.find("overall") != std::string::npos);
    auto records = format_report_records(report);
    CHECK(records.find("id=x") != std::string::npos);
    CHECK(records.find("pk_truth=0") != std::string::npos);
}
