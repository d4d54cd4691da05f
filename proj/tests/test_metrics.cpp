#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lncb/metrics.hpp"
#include "lncb/rng.hpp"

using namespace lncb;

namespace {

PredictionInstance instance(Label truth, Label predicted, double age_days = 10.0,
                            int64_t ts = 1700000000) {
    PredictionInstance p;
    p.snapshot_ts = ts;
    p.edge = {"a", "b"};
    p.truth = truth;
    p.predicted = predicted;
    p.edge_age_days = age_days;
    return p;
}

std::vector<PredictionInstance> random_instances(Rng& rng, std::size_t n) {
    std::vector<PredictionInstance> out;
    for (std::size_t i = 0; i < n; ++i) {
        // Skewed so some classes stay rare but all appear.
        const auto skew = [&rng]() {
            const double u = rng.uniform();
            return u < 0.8 ? Label::Open : u < 0.9 ? Label::Forced : Label::Mutual;
        };
        out.push_back(instance(skew(), skew(), rng.uniform(0.0, 500.0)));
    }
    return out;
}

}  // namespace

TEST_CASE("perfect predictions score one everywhere") {
    std::vector<PredictionInstance> instances;
    for (int c = 0; c < kNumClasses; ++c)
        for (int i = 0; i < 5; ++i)
            instances.push_back(instance(static_cast<Label>(c), static_cast<Label>(c)));

    const MetricsReport report = f1_report(instances);
    CHECK(report.instances == 15);
    CHECK(report.macro_f1 == doctest::Approx(1.0));
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& m = report.per_class[static_cast<std::size_t>(c)];
        CHECK(m.precision == doctest::Approx(1.0));
        CHECK(m.recall == doctest::Approx(1.0));
        CHECK(m.f1 == doctest::Approx(1.0));
        CHECK(m.support == 5);
    }
    for (int t = 0; t < kNumClasses; ++t)
        for (int p = 0; p < kNumClasses; ++p) {
            const auto ts = static_cast<std::size_t>(t);
            const auto ps = static_cast<std::size_t>(p);
            CHECK(report.confusion.counts[ts][ps] == (t == p ? 5 : 0));
            CHECK(report.confusion.normalized[ts][ps] ==
                  doctest::Approx(t == p ? 1.0 : 0.0));
        }
}

TEST_CASE("an always-open predictor earns the prevalence as precision") {
    // 6 open, 3 forced, 1 mutual, all predicted open.
    std::vector<PredictionInstance> instances;
    for (int i = 0; i < 6; ++i) instances.push_back(instance(Label::Open, Label::Open));
    for (int i = 0; i < 3; ++i) instances.push_back(instance(Label::Forced, Label::Open));
    instances.push_back(instance(Label::Mutual, Label::Open));

    const auto per_class = per_class_metrics(confusion(instances));
    const auto& open = per_class[static_cast<std::size_t>(Label::Open)];
    CHECK(open.precision == doctest::Approx(0.6));
    CHECK(open.recall == doctest::Approx(1.0));
    CHECK(open.f1 == doctest::Approx(2.0 * 0.6 / 1.6));
    const auto& forced = per_class[static_cast<std::size_t>(Label::Forced)];
    CHECK(forced.precision == 0.0);  // tp + fp == 0
    CHECK(forced.recall == 0.0);
    CHECK(forced.f1 == 0.0);

    CHECK(macro_f1(per_class) == doctest::Approx((2.0 * 0.6 / 1.6) / 3.0));
}

TEST_CASE("a hand-built confusion matrix reproduces the textbook numbers") {
    // truth open: 3 right, 1 as forced; truth forced: 2 right, 1 as mutual;
    // truth mutual: 1 right, 2 as open.
    std::vector<PredictionInstance> instances;
    for (int i = 0; i < 3; ++i) instances.push_back(instance(Label::Open, Label::Open));
    instances.push_back(instance(Label::Open, Label::Forced));
    for (int i = 0; i < 2; ++i) instances.push_back(instance(Label::Forced, Label::Forced));
    instances.push_back(instance(Label::Forced, Label::Mutual));
    instances.push_back(instance(Label::Mutual, Label::Mutual));
    for (int i = 0; i < 2; ++i) instances.push_back(instance(Label::Mutual, Label::Open));

    const ConfusionMatrix cm = confusion(instances);
    CHECK(cm.counts[0][0] == 3);
    CHECK(cm.counts[0][1] == 1);
    CHECK(cm.counts[1][1] == 2);
    CHECK(cm.counts[1][2] == 1);
    CHECK(cm.counts[2][2] == 1);
    CHECK(cm.counts[2][0] == 2);

    const auto per_class = per_class_metrics(cm);
    // open: tp 3, fp 2, fn 1 -> P 0.6, R 0.75
    CHECK(per_class[0].precision == doctest::Approx(0.6));
    CHECK(per_class[0].recall == doctest::Approx(0.75));
    CHECK(per_class[0].f1 == doctest::Approx(2 * 0.6 * 0.75 / 1.35));
    // forced: tp 2, fp 1, fn 1 -> P 2/3, R 2/3
    CHECK(per_class[1].precision == doctest::Approx(2.0 / 3.0));
    CHECK(per_class[1].recall == doctest::Approx(2.0 / 3.0));
    CHECK(per_class[1].f1 == doctest::Approx(2.0 / 3.0));
    // mutual: tp 1, fp 1, fn 2 -> P 0.5, R 1/3
    CHECK(per_class[2].precision == doctest::Approx(0.5));
    CHECK(per_class[2].recall == doctest::Approx(1.0 / 3.0));
    CHECK(per_class[2].f1 == doctest::Approx(2 * 0.5 * (1.0 / 3.0) / (0.5 + 1.0 / 3.0)));

    const double expected_macro =
        (per_class[0].f1 + per_class[1].f1 + per_class[2].f1) / 3.0;
    CHECK(macro_f1(per_class) == doctest::Approx(expected_macro));

    const MetricsReport report = f1_report(instances);
    CHECK(report.macro_f1 == doctest::Approx(expected_macro));
    CHECK(report.instances == instances.size());
}

TEST_CASE("confusion counts match a double loop over random instances") {
    Rng rng(31);
    const auto instances = random_instances(rng, 500);
    const ConfusionMatrix cm = confusion(instances);

    std::array<std::array<int64_t, kNumClasses>, kNumClasses> expected{};
    for (const auto& p : instances)
        expected[static_cast<std::size_t>(p.truth)][static_cast<std::size_t>(p.predicted)]++;
    for (int t = 0; t < kNumClasses; ++t) {
        int64_t row = 0;
        for (int p = 0; p < kNumClasses; ++p) {
            const auto ts = static_cast<std::size_t>(t);
            const auto ps = static_cast<std::size_t>(p);
            CHECK(cm.counts[ts][ps] == expected[ts][ps]);
            row += expected[ts][ps];
        }
        const auto ts = static_cast<std::size_t>(t);
        if (row == 0) {
            CHECK(cm.empty_row[ts]);
        } else {
            double norm_sum = 0.0;
            for (int p = 0; p < kNumClasses; ++p)
                norm_sum += cm.normalized[ts][static_cast<std::size_t>(p)];
            CHECK(norm_sum == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("macro f1 counts absent classes as zero") {
    // Only open instances, predicted perfectly: macro is 1/3.
    std::vector<PredictionInstance> instances(10, instance(Label::Open, Label::Open));
    const MetricsReport report = f1_report(instances);
    CHECK(report.per_class[0].f1 == doctest::Approx(1.0));
    CHECK(report.per_class[1].support == 0);
    CHECK(report.per_class[1].f1 == 0.0);
    CHECK(report.macro_f1 == doctest::Approx(1.0 / 3.0));
    CHECK(report.confusion.empty_row[1]);
    CHECK(report.confusion.empty_row[2]);
}

TEST_CASE("metrics refuse an empty instance list") {
    CHECK_THROWS_AS(confusion({}), EmptyInstances);
    CHECK_THROWS_AS(f1_report({}), EmptyInstances);
}

TEST_CASE("age bins are half-open intervals with an unbounded tail") {
    std::vector<PredictionInstance> instances;
    // Ages land in bins [0,30), [30,90), [90,180), [180,365), [365,inf).
    instances.push_back(instance(Label::Open, Label::Open, 10.0));
    instances.push_back(instance(Label::Open, Label::Forced, 30.0));  // boundary: second bin
    instances.push_back(instance(Label::Forced, Label::Forced, 100.0));
    instances.push_back(instance(Label::Open, Label::Open, 400.0));
    instances.push_back(instance(Label::Open, Label::Open, 365.0));  // boundary: last bin

    const auto bins = age_binned_f1(instances);
    REQUIRE(bins.size() == 5);
    CHECK(bins[0].lo_days == 0.0);
    CHECK(bins[0].hi_days == 30.0);
    CHECK(bins[0].support == 1);
    CHECK(bins[0].per_class[0].f1 == doctest::Approx(1.0));
    CHECK(bins[1].support == 1);
    CHECK(bins[1].per_class[0].f1 == 0.0);  // the lone open instance predicted forced
    CHECK(bins[2].support == 1);
    CHECK(bins[2].per_class[1].f1 == doctest::Approx(1.0));
    CHECK(bins[3].support == 0);
    CHECK(std::isinf(bins[4].hi_days));
    CHECK(bins[4].support == 2);
    CHECK(bins[4].macro_f1 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("empty age bins report zero support and zero macro") {
    std::vector<PredictionInstance> instances(3, instance(Label::Open, Label::Open, 500.0));
    const auto bins = age_binned_f1(instances);
    REQUIRE(bins.size() == 5);
    for (std::size_t i = 0; i + 1 < bins.size(); ++i) {
        CHECK(bins[i].support == 0);
        CHECK(bins[i].macro_f1 == 0.0);
    }
    CHECK(bins.back().support == 3);
}

TEST_CASE("the report json carries every block") {
    Rng rng(32);
    const auto instances = random_instances(rng, 200);
    const MetricsReport report = f1_report(instances);
    const nlohmann::json j = to_json(report);
    CHECK(j.at("instances").get<std::size_t>() == report.instances);
    CHECK(j.at("macro_f1").get<double>() == doctest::Approx(report.macro_f1));
    CHECK(j.at("per_class").contains("open"));
    CHECK(j.at("per_class").contains("forced"));
    CHECK(j.at("per_class").contains("mutual"));
    CHECK(j.contains("confusion_counts"));
    CHECK(j.contains("confusion_normalized"));
    CHECK(j.at("age_bins").size() == report.age_bins.size());
    // The unbounded tail serializes as a null upper edge.
    CHECK(j.at("age_bins").back().at("hi_days").is_null());
}

TEST_CASE("csv writers emit headers and the infinity tail") {
    Rng rng(33);
    const auto instances = random_instances(rng, 100);
    const MetricsReport report = f1_report(instances);

    std::ostringstream conf;
    write_confusion_csv(report.confusion, conf);
    CHECK(conf.str().find("true_class") != std::string::npos);
    CHECK(conf.str().find("open") != std::string::npos);

    std::ostringstream bins;
    write_age_bins_csv(report.age_bins, bins);
    CHECK(bins.str().find("lo_days") != std::string::npos);
    CHECK(bins.str().find("inf") != std::string::npos);
}
