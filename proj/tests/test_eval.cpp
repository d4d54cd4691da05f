#include <array>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lncb/eval.hpp"
#include "lncb/ingest.hpp"

using namespace lncb;

namespace {

// Two warm channels that force-close early, one long-lived channel opened in
// the timeline, one late channel that closes mutually at the very end.
//
// Train snapshots (delta 150s): ts 100 sees {forced, forced, open}, ts 200
// sees {open}, ts 300 sees {open, open}.
struct HandLog {
    EventLog warm;
    EventLog timeline;
    SplitBoundaries splits;
};

HandLog hand_log() {
    HandLog h;
    h.warm.events.push_back(testutil::make_open(0, "A:0", "a", "b"));
    h.warm.events.push_back(testutil::make_open(0, "B:0", "a2", "b2"));
    h.timeline.events.push_back(testutil::make_open(100, "C:0", "c", "d"));
    h.timeline.events.push_back(testutil::make_close(200, "A:0", "a", "b", EventLabel::Forced));
    h.timeline.events.push_back(testutil::make_close(200, "B:0", "a2", "b2", EventLabel::Forced));
    h.timeline.events.push_back(testutil::make_open(300, "E:0", "e", "f"));
    h.timeline.events.push_back(testutil::make_close(1000, "E:0", "e", "f", EventLabel::Mutual));
    h.splits = chronological_split(h.timeline);  // boundaries 730 / 865 / 1000
    return h;
}

// Doomed channels (capacity 1000) force-close two snapshots after opening;
// stable warm channels (capacity 10M) never close. Perfectly separable on the
// scaled capacity column.
struct SeparableLog {
    EventLog warm;
    EventLog timeline;
    SplitBoundaries splits;
    Scaler scaler;
};

SeparableLog separable_log() {
    SeparableLog s;
    const int64_t step = 600;
    for (int i = 0; i < 4; ++i)
        s.warm.events.push_back(testutil::make_open(0, "s" + std::to_string(i) + ":0",
                                                    "sa" + std::to_string(i),
                                                    "sb" + std::to_string(i), 10'000'000));
    for (int k = 1; k <= 14; ++k) {
        const int64_t ts = k * step;
        if (k >= 3 && k - 2 <= 12) {
            const std::string id = "d" + std::to_string(k - 2);
            s.timeline.events.push_back(testutil::make_close(
                ts, id + ":0", id + "a", id + "b", EventLabel::Forced));
        }
        if (k <= 12) {
            const std::string id = "d" + std::to_string(k);
            s.timeline.events.push_back(
                testutil::make_open(ts, id + ":0", id + "a", id + "b", 1000));
        }
    }
    s.splits = chronological_split(s.timeline);

    std::vector<std::vector<std::optional<double>>> rows;
    for (const auto& e : s.warm.events) rows.push_back(edge_numeric_row(e, false));
    for (const auto& e : s.timeline.events)
        if (e.channel_status == ChannelStatus::Opening && e.gossip_ts <= s.splits.train_end_ts)
            rows.push_back(edge_numeric_row(e, false));
    s.scaler = Scaler::fit(rows, edge_numeric_names(false));
    return s;
}

// Depth-1 model reading only the scaled capacity column: big capacity means
// open, small capacity means forced, mutual never wins.
MlpModel capacity_threshold_model() {
    FeatureConfig features;
    features.groups.node = false;
    features.groups.time = false;

    MlpModel model;
    model.schema = build_schema(features);
    model.depth = 1;
    model.hidden = 1;
    Mat w(kNumClasses, model.schema.dim());
    w.at(0, 0) = 10.0;
    w.at(1, 0) = -10.0;
    model.w.push_back(w);
    model.b.push_back({-5.0, 5.0, -100.0});
    return model;
}

}  // namespace

TEST_CASE("the train label distribution matches hand counts") {
    const HandLog h = hand_log();
    const auto dist = train_label_distribution(h.warm, h.timeline, h.splits, 150);
    CHECK(dist[0] == doctest::Approx(4.0 / 6.0));
    CHECK(dist[1] == doctest::Approx(2.0 / 6.0));
    CHECK(dist[2] == 0.0);
}

TEST_CASE("the majority baseline scores exactly its closed form") {
    const HandLog h = hand_log();
    std::vector<PredictionInstance> instances;
    const MetricsReport report = evaluate_baseline(BaselineKind::Majority, h.warm, h.timeline,
                                                   h.splits, Split::Train, 150, 0, {}, &instances);

    REQUIRE(instances.size() == 6);
    for (const auto& p : instances) CHECK(p.predicted == Label::Open);
    CHECK(instances[0].edge == EdgeKey{"a", "b"});
    CHECK(instances[0].truth == Label::Forced);
    CHECK(instances[0].snapshot_ts == 100);
    CHECK(instances[0].edge_age_days == doctest::Approx(100.0 / 86400.0));

    // 4 open, 2 forced, all predicted open.
    CHECK(report.instances == 6);
    CHECK(report.per_class[0].precision == doctest::Approx(2.0 / 3.0));
    CHECK(report.per_class[0].recall == doctest::Approx(1.0));
    CHECK(report.per_class[0].f1 == doctest::Approx(0.8));
    CHECK(report.macro_f1 == doctest::Approx(0.8 / 3.0));

    // The pooled report agrees with scoring the instances directly.
    const MetricsReport direct = f1_report(instances);
    CHECK(report.macro_f1 == doctest::Approx(direct.macro_f1));
    CHECK(report.confusion.counts == direct.confusion.counts);
}

TEST_CASE("per snapshot averaging changes the f1 means but not the counts") {
    const HandLog h = hand_log();
    EvalOptions per_snapshot;
    per_snapshot.per_snapshot_average = true;

    const MetricsReport pooled = evaluate_baseline(BaselineKind::Majority, h.warm, h.timeline,
                                                   h.splits, Split::Train, 150, 0);
    const MetricsReport avg = evaluate_baseline(BaselineKind::Majority, h.warm, h.timeline,
                                                h.splits, Split::Train, 150, 0, per_snapshot);

    // Pooled: open P 4/6, R 1. Snapshot means: open F1 (1/2 + 1 + 1) / 3.
    CHECK(pooled.per_class[0].f1 == doctest::Approx(0.8));
    CHECK(pooled.macro_f1 == doctest::Approx(0.8 / 3.0));
    CHECK(avg.per_class[0].f1 == doctest::Approx(5.0 / 6.0));
    CHECK(avg.macro_f1 == doctest::Approx(5.0 / 18.0));

    // Confusion counts and supports stay pooled in both modes.
    CHECK(avg.confusion.counts == pooled.confusion.counts);
    CHECK(avg.per_class[0].support == 4);
    CHECK(avg.per_class[1].support == 2);
    CHECK(avg.instances == 6);
}

TEST_CASE("a capacity threshold model is scored as a perfect classifier") {
    const SeparableLog s = separable_log();
    const MlpModel model = capacity_threshold_model();

    std::vector<PredictionInstance> instances;
    const MetricsReport report = evaluate_model(model, s.scaler, s.warm, s.timeline, s.splits,
                                                Split::Test, 1200, {}, &instances);

    REQUIRE(instances.size() == 9);
    for (const auto& p : instances) CHECK(p.predicted == p.truth);
    std::set<int64_t> snapshot_ts;
    for (const auto& p : instances) snapshot_ts.insert(p.snapshot_ts);
    CHECK(snapshot_ts == std::set<int64_t>{7800, 8400});

    CHECK(report.per_class[0].f1 == doctest::Approx(1.0));
    CHECK(report.per_class[1].f1 == doctest::Approx(1.0));
    CHECK(report.per_class[2].support == 0);
    CHECK(report.macro_f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("the validation window can be empty and says so") {
    EventLog timeline;
    timeline.events.push_back(testutil::make_open(100, "C:0", "c", "d"));
    timeline.events.push_back(testutil::make_open(200, "G:0", "g", "h"));
    timeline.events.push_back(testutil::make_close(1000, "C:0", "c", "d", EventLabel::Mutual));
    const SplitBoundaries splits = chronological_split(timeline);
    const EventLog warm;

    CHECK_THROWS_AS(evaluate_baseline(BaselineKind::Majority, warm, timeline, splits, Split::Val,
                                      150, 0),
                    EmptySplit);
}

TEST_CASE("a single-horizon sweep equals a direct train and evaluate") {
    lncb::Rng stream_rng(41);
    EventLog log = testutil::random_stream(stream_rng, 700, 12);
    const WarmSplit split = split_warm_start(log);
    const SplitBoundaries splits = chronological_split(split.timeline);
    const Scaler scaler = Scaler::fit({{}}, {});

    TrainConfig cfg;
    cfg.features.groups.edge = false;
    cfg.features.d_time = 4;
    cfg.depth = 2;
    cfg.hidden = 8;
    cfg.epochs = 2;
    cfg.lr = 1e-3;
    cfg.warmup_steps = 5;
    cfg.seed = 3;

    const auto rows = sweep_delta(cfg, split.warm, split.timeline, splits, scaler, {1.0});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].delta_days == 1.0);

    TrainConfig direct_cfg = cfg;
    direct_cfg.delta_seconds = 86400;
    const TrainResult direct = train(direct_cfg, split.warm, split.timeline, splits, scaler);
    const MetricsReport mlp = evaluate_model(direct.model, scaler, split.warm, split.timeline,
                                             splits, Split::Test, 86400);
    const MetricsReport strat =
        evaluate_baseline(BaselineKind::Stratified, split.warm, split.timeline, splits,
                          Split::Test, 86400, cfg.seed);

    CHECK(rows[0].mlp.macro_f1 == mlp.macro_f1);
    CHECK(rows[0].stratified.macro_f1 == strat.macro_f1);
    CHECK(rows[0].gap == doctest::Approx(mlp.macro_f1 - strat.macro_f1));

    std::ostringstream csv;
    write_sweep_csv(rows, csv);
    CHECK(csv.str().rfind("delta_days,mlp_macro_f1,stratified_macro_f1,gap\n", 0) == 0);
}
