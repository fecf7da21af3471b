#include <doctest.h>

#include <fstream>

#include "patchseg/cross_validation.hpp"
#include "patchseg/error.hpp"
#include "patchseg/folds.hpp"
#include "patchseg/metrics.hpp"
#include "support.hpp"

using namespace patchseg;
using namespace patchseg::testing;
using nlohmann::json;

TEST_CASE("dice_jaccard examples") {
    const std::vector<std::uint8_t> g{1, 1, 0, 0};
    const auto same = dice_jaccard(std::vector<float>{1, 1, 0, 0}, g);
    CHECK(same.dice == 1.0);
    CHECK(same.jaccard == 1.0);
    const auto disjoint = dice_jaccard(std::vector<float>{0, 0, 1, 1}, g);
    CHECK(disjoint.dice == 0.0);
    CHECK(disjoint.jaccard == 0.0);
    const auto partial = dice_jaccard(std::vector<float>{0.7f, 0.2f, 0.4f, 0.0f}, g);
    CHECK(partial.dice == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(partial.jaccard == 0.5);
    const auto empty = dice_jaccard(std::vector<float>{0.1f, 0.2f}, std::vector<std::uint8_t>{0, 0});
    CHECK(empty.dice == 1.0);
    CHECK(empty.jaccard == 1.0);
    CHECK(count_overlap(std::vector<float>{0.5f}, std::vector<std::uint8_t>{1}).tp == 1);
    CHECK_THROWS_AS(dice_jaccard(std::vector<float>{0.1f}, g), ArgumentError);
}

TEST_CASE("dice equals 2J/(1+J) on random pairs") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::bernoulli_distribution b(0.3);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
        std::vector<float> s(n);
        std::vector<std::uint8_t> g(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = u(rng);
            g[i] = b(rng);
        }
        const auto r = dice_jaccard(s, g);
        CHECK(r.jaccard <= r.dice);
        CHECK(std::abs(r.dice - 2 * r.jaccard / (1 + r.jaccard)) <= 1e-12);
    }
}

TEST_CASE("average_precision examples") {
    const std::vector<double> s{0.9, 0.8, 0.1};
    const std::vector<std::uint8_t> l{1, 0, 1};
    CHECK(average_precision<double>(s, l) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
    CHECK(average_precision_stable<double>(s, l) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
    const std::vector<std::uint8_t> ranked{1, 1, 0};
    CHECK(average_precision<double>(s, ranked) == 1.0);
    CHECK_THROWS_AS(average_precision<double>(s, std::vector<std::uint8_t>{0, 0, 0}), UndefinedMetricError);
    CHECK_THROWS_AS(average_precision<double>(s, std::vector<std::uint8_t>{0, 1}), ArgumentError);
}

TEST_CASE("tied scores: grouped AP equals prevalence, stable AP follows input order") {
    const std::vector<double> s(4, 0.5);
    const std::vector<std::uint8_t> l{0, 1, 0, 1};
    CHECK(average_precision<double>(s, l) == 0.5);
    CHECK(average_precision_stable<double>(s, l) == doctest::Approx((0.5 + 0.5) / 2.0));
    const std::vector<std::uint8_t> first{1, 0, 0, 0};
    CHECK(average_precision<double>(s, first) == 0.25);
    CHECK(average_precision_stable<double>(s, first) == 1.0);
}

TEST_CASE("roc_auc examples") {
    CHECK(roc_auc<double>(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{1, 0}) == 1.0);
    CHECK(roc_auc<double>(std::vector<double>(6, 0.3), std::vector<std::uint8_t>{1, 0, 1, 0, 0, 1}) == 0.5);
    CHECK(roc_auc<double>(std::vector<double>{0.9, 0.4, 0.35, 0.8}, std::vector<std::uint8_t>{1, 0, 1, 0}) == 0.5);
    CHECK_THROWS_AS(roc_auc<double>(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), UndefinedMetricError);
    CHECK_THROWS_AS(roc_auc<double>(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{0, 0}), UndefinedMetricError);
}

TEST_CASE("AP and AUC match brute-force oracles exactly") {
    std::mt19937_64 rng(2);
    int ap_checked = 0, auc_checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 32)(rng);
        const int levels = std::uniform_int_distribution<int>(2, 40)(rng);  // few levels force ties
        std::vector<double> s(n);
        std::vector<std::uint8_t> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::uniform_int_distribution<int>(0, levels)(rng) / static_cast<double>(levels);
            l[i] = std::bernoulli_distribution(0.4)(rng);
        }
        const auto pos = std::count(l.begin(), l.end(), std::uint8_t{1});
        if (pos > 0) {
            REQUIRE(average_precision<double>(s, l) == oracle_average_precision(s, l));
            ++ap_checked;
        }
        if (pos > 0 && pos < static_cast<long>(n)) {
            REQUIRE(roc_auc<double>(s, l) == oracle_roc_auc(s, l));
            ++auc_checked;
        }
    }
    CHECK(ap_checked > 900);
    CHECK(auc_checked > 800);
}

TEST_CASE("AP and AUC are invariant under strictly increasing transforms") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 64)(rng);
        std::vector<double> s(n);
        std::vector<std::uint8_t> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::round(u(rng) * 20) / 20;
            l[i] = i < 2 ? static_cast<std::uint8_t>(i) : std::bernoulli_distribution(0.5)(rng);
        }
        const double a = 0.5 + 3 * u(rng), b = u(rng);
        std::vector<double> t(n);
        std::transform(s.begin(), s.end(), t.begin(), [&](double x) { return std::exp(a * x) + b * x * x * x; });
        CHECK(average_precision<double>(s, l) == average_precision<double>(t, l));
        CHECK(roc_auc<double>(s, l) == roc_auc<double>(t, l));
    }
}

TEST_CASE("curves end at the full recall / full FPR corner") {
    const std::vector<double> s{0.9, 0.4, 0.35, 0.8};
    const std::vector<std::uint8_t> l{1, 0, 1, 0};
    const auto roc = roc_curve<double>(s, l);
    CHECK(roc.back().x == 1.0);
    CHECK(roc.back().y == 1.0);
    const auto pr = pr_curve<double>(s, l);
    CHECK(pr.back().x == 1.0);
}

namespace {

struct Micro {
    std::vector<ScoreVolume> scores;
    std::vector<CtStack> stacks;
    json expected;
};

Micro load_micro() {
    const json j = json::parse(std::ifstream(std::string(PATCHSEG_FIXTURE_DIR) + "/micro_eval.json"));
    Micro m;
    for (const auto& s : j.at("stacks")) {
        const int depth = static_cast<int>(s.at("scores").size());
        CtStack st = constant_stack(depth, 2, 0, s.at("stack_id"));
        ScoreVolume sv{s.at("stack_id"), Volume<float>(depth, 2, 2)};
        for (int d = 0; d < depth; ++d)
            for (int i = 0; i < 4; ++i) {
                sv.scores.frame(d)[i] = s.at("scores")[d][i].get<float>();
                st.mask->frame(d)[i] = s.at("mask")[d][i].get<std::uint8_t>();
            }
        m.scores.push_back(sv);
        m.stacks.push_back(st);
    }
    m.expected = j.at("expected");
    return m;
}

}  // namespace

TEST_CASE("evaluate reproduces the hand-computed micro fixture") {
    const Micro m = load_micro();
    const EvalReport r = evaluate(m.scores, m.stacks);
    const json& e = m.expected;
    CHECK(r.counts.tp == e.at("counts").at("tp"));
    CHECK(r.counts.fp == e.at("counts").at("fp"));
    CHECK(r.counts.fn == e.at("counts").at("fn"));
    CHECK(r.counts.tn == e.at("counts").at("tn"));
    CHECK(r.dice == doctest::Approx(e.at("dice").get<double>()).epsilon(1e-15));
    CHECK(r.jaccard == e.at("jaccard").get<double>());
    CHECK(*r.pixel_ap == e.at("pixel_ap").get<double>());
    CHECK(*r.frame_ap == e.at("frame_ap").get<double>());
    CHECK(*r.frame_ap_lp == e.at("frame_ap_lp").get<double>());
    CHECK(*r.stack_auc == e.at("stack_auc").get<double>());
    CHECK(r.pixels == e.at("pixels"));
    CHECK(r.frames == e.at("frames"));
    CHECK(r.positive_frames == e.at("positive_frames"));
    CHECK(r.stacks == e.at("stacks"));
    CHECK(r.positive_stacks == e.at("positive_stacks"));
    CHECK(EvalReport::from_json(r.to_json()) == r);
}

TEST_CASE("perfect and constant predictors") {
    std::vector<CtStack> stacks;
    std::vector<ScoreVolume> perfect, constant;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        PhantomParams params = small_phantom(32, 4);
        if (seed % 2 == 1) params.min_lesions = params.max_lesions = 0;
        stacks.push_back(generate_stack(params, seed));
        ScoreVolume p{stacks.back().stack_id, Volume<float>(stacks.back().depth(), 32, 32)};
        const auto mask = stacks.back().mask->values();
        for (std::size_t i = 0; i < mask.size(); ++i) p.scores.values()[i] = mask[i];
        perfect.push_back(p);
        constant.push_back({p.stack_id, Volume<float>(p.scores.depth(), 32, 32, 0.5f)});
    }
    const EvalReport best = evaluate(perfect, stacks);
    CHECK(best.dice == 1.0);
    CHECK(best.jaccard == 1.0);
    CHECK(*best.pixel_ap == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*best.frame_ap == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(best.stack_auc.has_value());
    CHECK(*best.stack_auc == 1.0);

    const EvalReport flat = evaluate(constant, stacks);
    const double prevalence = static_cast<double>(best.counts.tp) / static_cast<double>(best.pixels);
    CHECK(*flat.pixel_ap == prevalence);
}

TEST_CASE("evaluate rejects unmatched stacks") {
    std::vector<CtStack> stacks{constant_stack(1, 4, 0, "x")};
    std::vector<ScoreVolume> wrong_id{{"y", Volume<float>(1, 4, 4)}};
    CHECK_THROWS_AS(evaluate(wrong_id, stacks), ArgumentError);
    std::vector<ScoreVolume> wrong_shape{{"x", Volume<float>(2, 4, 4)}};
    CHECK_THROWS_AS(evaluate(wrong_shape, stacks), ArgumentError);
    std::vector<ScoreVolume> none;
    CHECK_THROWS_AS(evaluate(none, stacks), ArgumentError);
}

TEST_CASE("negative-only test sets leave ranking metrics undefined") {
    std::vector<CtStack> stacks{constant_stack(2, 4, 0, "n")};
    std::vector<ScoreVolume> scores{{"n", Volume<float>(2, 4, 4, 0.1f)}};
    const EvalReport r = evaluate(scores, stacks);
    CHECK(r.dice == 1.0);
    CHECK_FALSE(r.pixel_ap.has_value());
    CHECK_FALSE(r.stack_auc.has_value());
    CHECK(r.to_json().at("pixel_ap").is_null());
}

TEST_CASE("curves CSV") {
    const Micro m = load_micro();
    TempDir dir("metrics_csv");
    write_curves_csv(m.scores, m.stacks, dir / "roc.csv", dir / "pr.csv");
    std::ifstream roc(dir / "roc.csv");
    std::string header;
    std::getline(roc, header);
    CHECK(header == "threshold,fpr,tpr");
    std::ifstream pr(dir / "pr.csv");
    std::getline(pr, header);
    CHECK(header == "threshold,recall,precision");
}

TEST_CASE("mean and population standard deviation") {
    const MeanStd same = mean_std(std::vector<double>{0.5, 0.5, 0.5});
    CHECK(same.std == 0.0);
    const MeanStd two = mean_std(std::vector<double>{0.70, 0.74});
    CHECK(two.mean == doctest::Approx(0.72).epsilon(1e-14));
    CHECK(two.std == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(two.count == 2);
}

TEST_CASE("cross_validate uses split_folds and aggregates per metric") {
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) ids.push_back("s" + std::to_string(i));
    const FoldSplit expected = split_folds(ids, 4, 5);
    std::vector<std::vector<std::string>> seen_test;
    const auto report = cross_validate(ids, 4, 5, [&](int fold, std::span<const std::string> train,
                                                      std::span<const std::string> test) {
        seen_test.emplace_back(test.begin(), test.end());
        CHECK(train.size() + test.size() == ids.size());
        EvalReport r;
        r.dice = 0.5 + 0.1 * fold;
        r.jaccard = r.dice / (2 - r.dice);
        r.pixel_ap = 0.8;
        return r;
    });
    REQUIRE(seen_test.size() == 4);
    for (int f = 0; f < 4; ++f) CHECK(seen_test[f] == expected.members(f));
    CHECK(report.split.assignment == expected.assignment);
    CHECK(report.summary.at("dice").mean == doctest::Approx(0.65));
    CHECK(report.summary.at("pixel_ap").std == 0.0);
    CHECK_FALSE(report.summary.count("stack_auc"));
    CHECK_THROWS_AS(cross_validate(ids, 1, 5, [](int, auto, auto) { return EvalReport{}; }), ArgumentError);
    const json j = report.to_json();
    CHECK(j.at("folds").size() == 4);
}
