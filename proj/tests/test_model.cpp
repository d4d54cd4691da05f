#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lncb/eval.hpp"
#include "lncb/ingest.hpp"
#include "lncb/model.hpp"

using namespace lncb;

namespace {

// Node-counter features only: six static inputs, no scaler, no encoder.
FeatureConfig node_only() {
    FeatureConfig cfg;
    cfg.groups.edge = false;
    cfg.groups.time = false;
    return cfg;
}

FeatureConfig node_and_time(int d_time) {
    FeatureConfig cfg;
    cfg.groups.edge = false;
    cfg.d_time = d_time;
    return cfg;
}

Mat random_input(Rng& rng, std::size_t n, std::size_t dim, double lo = -1.0, double hi = 1.0) {
    Mat x(n, dim);
    for (double& v : x.data) v = rng.uniform(lo, hi);
    return x;
}

SnapshotBatch random_batch(Rng& rng, std::size_t n, const FeatureSchema& schema) {
    SnapshotBatch batch;
    batch.snapshot_ts = 0;
    batch.static_x = Mat(n, schema.static_dim());
    for (double& v : batch.static_x.data) v = rng.uniform(0.0, 1.0);
    batch.time_scalars = Mat(n, 3);
    for (double& v : batch.time_scalars.data) v = rng.uniform(0.0, 120.0);
    for (std::size_t i = 0; i < n; ++i) {
        batch.edges.emplace_back("a" + std::to_string(i), "b" + std::to_string(i));
        batch.edge_age_days.push_back(batch.time_scalars.at(i, 0));
    }
    return batch;
}

double loss_at(const MlpModel& model, const SnapshotBatch& batch, const std::vector<int>& labels,
               const std::array<double, kNumClasses>& weights) {
    const Mat logits = forward_batch(model, batch);
    return weighted_ce_loss(logits, labels, weights).loss;
}

}  // namespace

TEST_CASE("train config validation rejects bad settings") {
    TrainConfig good;
    CHECK_NOTHROW(good.validate());

    auto rejects = [](auto&& mutate) {
        TrainConfig cfg;
        mutate(cfg);
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    };
    rejects([](TrainConfig& c) { c.epochs = 0; });
    rejects([](TrainConfig& c) { c.lr = 0.0; });
    rejects([](TrainConfig& c) { c.weight_decay = -1e-3; });
    rejects([](TrainConfig& c) { c.warmup_steps = -1; });
    rejects([](TrainConfig& c) { c.class_weights[1] = 0.0; });
    rejects([](TrainConfig& c) { c.downsample_ratio = 0.0; });
    rejects([](TrainConfig& c) { c.max_open_edges_per_step = 0; });
    rejects([](TrainConfig& c) { c.delta_seconds = 0; });
    rejects([](TrainConfig& c) { c.depth = 0; });
    rejects([](TrainConfig& c) { c.depth = 4; });
    rejects([](TrainConfig& c) { c.hidden = 0; });
    rejects([](TrainConfig& c) { c.features.d_time = 0; });
    rejects([](TrainConfig& c) {
        c.features.groups.edge = c.features.groups.node = c.features.groups.time = false;
    });
}

TEST_CASE("train config json round trip keeps every field") {
    TrainConfig cfg;
    cfg.epochs = 7;
    cfg.lr = 3e-3;
    cfg.weight_decay = 1e-4;
    cfg.warmup_steps = 42;
    cfg.class_weights = {1.0, 4.0, 2.5};
    cfg.downsample_ratio = 1.5;
    cfg.max_open_edges_per_step = 2048;
    cfg.seed = 99;
    cfg.delta_seconds = 86400;
    cfg.depth = 3;
    cfg.hidden = 17;
    cfg.features.groups.node = false;
    cfg.features.d_time = 12;
    cfg.features.include_chain_fields = true;

    const TrainConfig back = TrainConfig::from_json(cfg.to_json());
    CHECK(back.epochs == cfg.epochs);
    CHECK(back.lr == cfg.lr);
    CHECK(back.weight_decay == cfg.weight_decay);
    CHECK(back.warmup_steps == cfg.warmup_steps);
    CHECK(back.class_weights == cfg.class_weights);
    CHECK(back.downsample_ratio == cfg.downsample_ratio);
    CHECK(back.max_open_edges_per_step == cfg.max_open_edges_per_step);
    CHECK(back.seed == cfg.seed);
    CHECK(back.delta_seconds == cfg.delta_seconds);
    CHECK(back.depth == cfg.depth);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.features.groups.node == cfg.features.groups.node);
    CHECK(back.features.d_time == cfg.features.d_time);
    CHECK(back.features.include_chain_fields == cfg.features.include_chain_fields);

    TrainConfig defaults;
    const TrainConfig back2 = TrainConfig::from_json(defaults.to_json());
    CHECK_FALSE(back2.downsample_ratio.has_value());
    CHECK_FALSE(back2.max_open_edges_per_step.has_value());
}

TEST_CASE("a zeroed model predicts one third for every class") {
    Rng rng(1);
    MlpModel model = MlpModel::init(node_only(), 2, 8, rng);
    for (Mat& w : model.w) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (auto& b : model.b) std::fill(b.begin(), b.end(), 0.0);

    const Mat x = random_input(rng, 5, model.input_dim());
    const Mat logits = forward(model, x);
    Mat probs;
    kernels::softmax_rows(logits, probs);
    for (const double p : probs.data) CHECK(p == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("depth one is a single linear map") {
    Rng rng(2);
    MlpModel model = MlpModel::init(node_only(), 1, 64, rng);
    REQUIRE(model.w.size() == 1);
    REQUIRE(model.w[0].rows == kNumClasses);
    REQUIRE(model.w[0].cols == model.input_dim());

    const Mat x = random_input(rng, 4, model.input_dim());
    const Mat logits = forward(model, x);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            double expected = model.b[0][c];
            for (std::size_t k = 0; k < x.cols; ++k)
                expected += x.at(i, k) * model.w[0].at(c, k);
            CHECK(logits.at(i, c) == doctest::Approx(expected).epsilon(1e-12));
        }
}

TEST_CASE("deeper models match a straight-line recomputation") {
    Rng rng(3);
    for (int depth : {2, 3}) {
        MlpModel model = MlpModel::init(node_only(), depth, 7, rng);
        REQUIRE(model.w.size() == static_cast<std::size_t>(depth));
        const Mat x = random_input(rng, 3, model.input_dim());
        const Mat logits = forward(model, x);

        for (std::size_t i = 0; i < x.rows; ++i) {
            std::vector<double> act(x.row(i), x.row(i) + x.cols);
            for (std::size_t l = 0; l < model.w.size(); ++l) {
                std::vector<double> next(model.w[l].rows);
                for (std::size_t o = 0; o < model.w[l].rows; ++o) {
                    double acc = model.b[l][o];
                    for (std::size_t k = 0; k < model.w[l].cols; ++k)
                        acc += act[k] * model.w[l].at(o, k);
                    next[o] = l + 1 < model.w.size() ? std::max(0.0, acc) : acc;
                }
                act = std::move(next);
            }
            for (std::size_t c = 0; c < kNumClasses; ++c)
                CHECK(logits.at(i, c) == doctest::Approx(act[c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward rejects inputs of the wrong width") {
    Rng rng(4);
    MlpModel model = MlpModel::init(node_only(), 1, 8, rng);
    const Mat bad(2, model.input_dim() + 1);
    CHECK_THROWS_AS(forward(model, bad), ShapeMismatch);
}

TEST_CASE("weighted cross entropy hits the closed form on uniform logits") {
    Mat logits(1, kNumClasses);  // all zero, softmax 1/3 each
    const std::array<double, kNumClasses> weights{1.0, 5.0, 5.0};

    LossResult forced = weighted_ce_loss(logits, {static_cast<int>(Label::Forced)}, weights);
    CHECK(forced.loss == doctest::Approx(5.0 * std::log(3.0)));  // 5.4931
    LossResult open = weighted_ce_loss(logits, {static_cast<int>(Label::Open)}, weights);
    CHECK(open.loss == doctest::Approx(std::log(3.0)));
}

TEST_CASE("unit weights reduce to the standard cross entropy") {
    Rng rng(5);
    Mat logits = random_input(rng, 6, kNumClasses, -2.0, 2.0);
    std::vector<int> labels;
    for (std::size_t i = 0; i < logits.rows; ++i)
        labels.push_back(static_cast<int>(rng.uniform_int(kNumClasses)));

    const LossResult r = weighted_ce_loss(logits, labels, {1.0, 1.0, 1.0});

    double expected = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        double denom = 0.0;
        for (std::size_t j = 0; j < kNumClasses; ++j) denom += std::exp(logits.at(i, j));
        expected += -std::log(std::exp(logits.at(i, static_cast<std::size_t>(labels[i]))) / denom);
    }
    expected /= static_cast<double>(logits.rows);
    CHECK(r.loss == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.rows_included == logits.rows);
}

TEST_CASE("loss gradient is the weighted softmax difference") {
    Rng rng(6);
    Mat logits = random_input(rng, 4, kNumClasses, -2.0, 2.0);
    const std::vector<int> labels{0, 2, 1, 1};
    const std::array<double, kNumClasses> weights{1.0, 5.0, 2.0};

    const LossResult r = weighted_ce_loss(logits, labels, weights);
    Mat probs;
    kernels::softmax_rows(logits, probs);
    const double inv_n = 1.0 / static_cast<double>(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double wy = weights[static_cast<std::size_t>(labels[i])];
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            const double onehot = static_cast<int>(j) == labels[i] ? 1.0 : 0.0;
            CHECK(r.dlogits.at(i, j) ==
                  doctest::Approx(wy * (probs.at(i, j) - onehot) * inv_n).epsilon(1e-12));
        }
    }
}

TEST_CASE("a row subset loses nothing against a physically subset batch") {
    Rng rng(7);
    Mat logits = random_input(rng, 10, kNumClasses, -2.0, 2.0);
    std::vector<int> labels;
    for (std::size_t i = 0; i < logits.rows; ++i)
        labels.push_back(static_cast<int>(rng.uniform_int(kNumClasses)));
    const std::array<double, kNumClasses> weights{1.0, 5.0, 5.0};
    const std::vector<std::size_t> rows{1, 4, 7};

    const LossResult subset = weighted_ce_loss(logits, labels, weights, rows);
    CHECK(subset.rows_included == 3);

    Mat sub_logits(rows.size(), kNumClasses);
    std::vector<int> sub_labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < kNumClasses; ++j)
            sub_logits.at(r, j) = logits.at(rows[r], j);
        sub_labels.push_back(labels[rows[r]]);
    }
    const LossResult dense = weighted_ce_loss(sub_logits, sub_labels, weights);
    CHECK(subset.loss == dense.loss);

    for (std::size_t i = 0; i < logits.rows; ++i) {
        const bool included = std::find(rows.begin(), rows.end(), i) != rows.end();
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            if (!included) CHECK(subset.dlogits.at(i, j) == 0.0);
        }
    }
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < kNumClasses; ++j)
            CHECK(subset.dlogits.at(rows[r], j) == dense.dlogits.at(r, j));
}

TEST_CASE("loss rejects malformed inputs") {
    Mat logits(2, kNumClasses);
    const std::array<double, kNumClasses> w{1.0, 1.0, 1.0};
    CHECK_THROWS_AS(weighted_ce_loss(logits, {0, 1}, w, std::vector<std::size_t>{}),
                    EmptyBatchAfterDownsampling);
    CHECK_THROWS_AS(weighted_ce_loss(logits, {0, 5}, w), ShapeMismatch);
    CHECK_THROWS_AS(weighted_ce_loss(logits, {0}, w), ShapeMismatch);
    const Mat wide(2, kNumClasses + 1);
    CHECK_THROWS_AS(weighted_ce_loss(wide, {0, 1}, w), ShapeMismatch);
}

TEST_CASE("downsampling keeps every closure row") {
    Rng rng(8);
    // 3 closures among 103 rows.
    std::vector<int> labels(103, static_cast<int>(Label::Open));
    labels[10] = static_cast<int>(Label::Forced);
    labels[50] = static_cast<int>(Label::Mutual);
    labels[90] = static_cast<int>(Label::Forced);

    for (const double ratio : {0.0, 0.5, 2.0, 10.0}) {
        const std::vector<std::size_t> rows = downsample_rows(labels, ratio, rng);
        CHECK(std::is_sorted(rows.begin(), rows.end()));
        std::size_t closures = 0;
        std::size_t opens = 0;
        for (const std::size_t i : rows)
            (labels[i] == static_cast<int>(Label::Open) ? opens : closures)++;
        CHECK(closures == 3);
        CHECK(opens == static_cast<std::size_t>(std::llround(ratio * 3.0)));
    }

    // Half-open rounding: 0.5 of 3 closures keeps 2 opens.
    const std::vector<std::size_t> rows = downsample_rows(labels, 0.5, rng);
    CHECK(rows.size() == 5);
}

TEST_CASE("downsampling an all-open batch to ratio zero closures throws") {
    Rng rng(9);
    const std::vector<int> labels(20, static_cast<int>(Label::Open));
    CHECK_THROWS_AS(downsample_rows(labels, 2.0, rng), EmptyBatchAfterDownsampling);
}

TEST_CASE("the per-step cap never drops closure rows") {
    Rng rng(10);
    std::vector<int> labels(25, static_cast<int>(Label::Open));
    for (const std::size_t i : {0u, 5u, 11u, 17u, 24u}) labels[i] = static_cast<int>(Label::Forced);

    SUBCASE("under the cap everything stays") {
        const auto rows = cap_open_rows(labels, 25, rng);
        CHECK(rows.size() == 25);
    }
    SUBCASE("a binding cap keeps all closures and samples opens") {
        const auto rows = cap_open_rows(labels, 10, rng);
        CHECK(rows.size() == 10);
        CHECK(std::is_sorted(rows.begin(), rows.end()));
        std::size_t closures = 0;
        for (const std::size_t i : rows)
            if (labels[i] != static_cast<int>(Label::Open)) ++closures;
        CHECK(closures == 5);
    }
    SUBCASE("a cap below the closure count still keeps every closure") {
        const auto rows = cap_open_rows(labels, 2, rng);
        CHECK(rows.size() == 5);
        for (const std::size_t i : rows) CHECK(labels[i] != static_cast<int>(Label::Open));
    }
}

TEST_CASE("select_rows copies the chosen instances verbatim") {
    Rng rng(11);
    const FeatureSchema schema = build_schema(node_only());
    const SnapshotBatch batch = random_batch(rng, 6, schema);
    const std::vector<std::size_t> rows{1, 3, 5};
    const SnapshotBatch sub = select_rows(batch, rows);
    REQUIRE(sub.size() == 3);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        CHECK(sub.edges[r] == batch.edges[rows[r]]);
        CHECK(sub.edge_age_days[r] == batch.edge_age_days[rows[r]]);
        for (std::size_t c = 0; c < batch.static_x.cols; ++c)
            CHECK(sub.static_x.at(r, c) == batch.static_x.at(rows[r], c));
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(sub.time_scalars.at(r, c) == batch.time_scalars.at(rows[r], c));
    }
}

TEST_CASE("adam warms the learning rate up linearly") {
    Rng rng(12);
    MlpModel model = MlpModel::init(node_only(), 1, 8, rng);
    Gradients zero;
    zero.w.push_back(Mat(model.w[0].rows, model.w[0].cols));
    zero.b.push_back(std::vector<double>(model.b[0].size(), 0.0));

    AdamOptimizer opt(0.1, 0.0, 4);
    CHECK(opt.effective_lr() == 0.0);
    for (int step = 1; step <= 6; ++step) {
        opt.step(model, zero);
        CHECK(opt.effective_lr() == doctest::Approx(0.1 * std::min(1.0, step / 4.0)));
    }
    CHECK(opt.steps_taken() == 6);

    AdamOptimizer no_warmup(0.05, 0.0, 0);
    CHECK(no_warmup.effective_lr() == 0.05);
}

TEST_CASE("the first adam step moves parameters by the signed learning rate") {
    Rng rng(13);
    MlpModel model = MlpModel::init(node_only(), 1, 8, rng);
    for (Mat& w : model.w) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (auto& b : model.b) std::fill(b.begin(), b.end(), 0.0);

    Gradients g;
    g.w.push_back(Mat(model.w[0].rows, model.w[0].cols));
    std::fill(g.w[0].data.begin(), g.w[0].data.end(), 1.0);
    g.b.push_back(std::vector<double>(model.b[0].size(), -2.0));

    AdamOptimizer opt(0.01, 0.0, 0);
    opt.step(model, g);
    // With fresh moments the bias corrections cancel and the update is
    // lr * g / (|g| + eps), i.e. a signed step of the learning rate.
    for (const double w : model.w[0].data) CHECK(w == doctest::Approx(-0.01).epsilon(1e-6));
    for (const double b : model.b[0]) CHECK(b == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("initial weights stay inside the fan-in bound") {
    Rng rng(14);
    MlpModel model = MlpModel::init(node_and_time(4), 3, 16, rng);
    REQUIRE(model.w.size() == 3);
    for (std::size_t l = 0; l < model.w.size(); ++l) {
        const double bound = std::sqrt(1.0 / static_cast<double>(model.w[l].cols));
        double max_abs = 0.0;
        for (const double v : model.w[l].data) {
            CHECK(std::abs(v) <= bound);
            max_abs = std::max(max_abs, std::abs(v));
        }
        for (const double v : model.b[l]) CHECK(std::abs(v) <= bound);
        CHECK(max_abs > 0.1 * bound);  // not degenerate
    }
    CHECK(model.encoder.dim() == 4);
}

TEST_CASE("gradients match central finite differences at every depth") {
    Rng rng(15);
    const FeatureConfig cfg = node_and_time(3);
    const std::array<double, kNumClasses> weights{1.0, 5.0, 5.0};

    for (int depth : {1, 2, 3}) {
        Rng init = rng.fork(static_cast<uint64_t>(depth));
        MlpModel model = MlpModel::init(cfg, depth, 5, init);
        const FeatureSchema& schema = model.schema;
        SnapshotBatch batch = random_batch(init, 4, schema);
        std::vector<int> labels;
        for (std::size_t i = 0; i < batch.size(); ++i)
            labels.push_back(static_cast<int>(init.uniform_int(kNumClasses)));

        ForwardCache cache;
        const Mat logits = forward_batch(model, batch, &cache);
        const LossResult loss = weighted_ce_loss(logits, labels, weights);
        const Gradients grads = backward(model, cache, loss.dlogits, &batch.time_scalars);

        const double eps = 1e-5;
        auto fd_check = [&](double& param, double analytic) {
            const double saved = param;
            param = saved + eps;
            const double up = loss_at(model, batch, labels, weights);
            param = saved - eps;
            const double down = loss_at(model, batch, labels, weights);
            param = saved;
            const double fd = (up - down) / (2.0 * eps);
            CHECK(analytic == doctest::Approx(fd).epsilon(1e-4));
        };

        for (std::size_t l = 0; l < model.w.size(); ++l) {
            for (std::size_t i = 0; i < model.w[l].data.size(); ++i)
                fd_check(model.w[l].data[i], grads.w[l].data[i]);
            for (std::size_t i = 0; i < model.b[l].size(); ++i)
                fd_check(model.b[l][i], grads.b[l][i]);
        }
        for (std::size_t i = 0; i < model.encoder.omega.size(); ++i)
            fd_check(model.encoder.omega[i], grads.omega[i]);
        for (std::size_t i = 0; i < model.encoder.phase.size(); ++i)
            fd_check(model.encoder.phase[i], grads.phase[i]);
    }
}

TEST_CASE("checkpoints round trip bit for bit") {
    Rng rng(16);
    MlpModel model = MlpModel::init(node_and_time(5), 2, 9, rng);
    for (double& p : model.encoder.phase) p = rng.uniform(-1.0, 1.0);

    TrainConfig cfg;
    cfg.features = node_and_time(5);
    cfg.depth = 2;
    cfg.hidden = 9;
    cfg.downsample_ratio = 2.5;

    const nlohmann::json j = checkpoint_json(model, cfg);
    TrainConfig cfg_back;
    const MlpModel back = load_checkpoint(j, &cfg_back);

    REQUIRE(back.w.size() == model.w.size());
    for (std::size_t l = 0; l < model.w.size(); ++l) {
        CHECK(back.w[l] == model.w[l]);
        CHECK(back.b[l] == model.b[l]);
    }
    CHECK(back.encoder == model.encoder);
    CHECK(back.schema.names == model.schema.names);
    CHECK(cfg_back.downsample_ratio == cfg.downsample_ratio);
    CHECK(checkpoint_json(back, cfg_back).dump() == j.dump());

    nlohmann::json corrupt = j;
    corrupt["layers"][0]["weights"] = "!!!not base64!!!";
    CHECK_THROWS(load_checkpoint(corrupt));
}

TEST_CASE("training twice with one seed gives identical checkpoints") {
    lncb::Rng stream_rng(17);
    EventLog log = testutil::random_stream(stream_rng, 2500, 20);
    const WarmSplit split = split_warm_start(log);
    const SplitBoundaries splits = chronological_split(split.timeline);
    const Scaler scaler = Scaler::fit({{}}, {});

    TrainConfig cfg;
    cfg.features = node_and_time(4);
    cfg.depth = 2;
    cfg.hidden = 8;
    cfg.epochs = 2;
    cfg.lr = 1e-3;
    cfg.warmup_steps = 10;
    cfg.delta_seconds = 86400;
    cfg.seed = 7;
    cfg.downsample_ratio = 2.0;
    cfg.max_open_edges_per_step = 64;

    const TrainResult a = train(cfg, split.warm, split.timeline, splits, scaler);
    const TrainResult b = train(cfg, split.warm, split.timeline, splits, scaler);
    CHECK(checkpoint_json(a.model, cfg).dump() == checkpoint_json(b.model, cfg).dump());
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.best_val_macro_f1 == b.best_val_macro_f1);
    CHECK(a.total_steps == b.total_steps);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t e = 0; e < a.log.size(); ++e) {
        CHECK(a.log[e].train_loss == b.log[e].train_loss);
        CHECK(a.log[e].val_macro_f1 == b.log[e].val_macro_f1);
    }

    TrainConfig other = cfg;
    other.seed = 8;
    const TrainResult c = train(other, split.warm, split.timeline, splits, scaler);
    CHECK(checkpoint_json(c.model, other).dump() != checkpoint_json(a.model, cfg).dump());
}

TEST_CASE("training throws when the train window has no snapshots") {
    lncb::Rng stream_rng(18);
    EventLog log = testutil::random_stream(stream_rng, 200, 10);
    const WarmSplit split = split_warm_start(log);
    SplitBoundaries splits;
    splits.train_end_ts = split.timeline.events.front().gossip_ts - 1;
    splits.val_end_ts = splits.train_end_ts;
    splits.data_end_ts = split.timeline.events.back().gossip_ts;

    TrainConfig cfg;
    cfg.features = node_only();
    cfg.epochs = 1;
    const Scaler scaler = Scaler::fit({{}}, {});
    CHECK_THROWS_AS(train(cfg, split.warm, split.timeline, splits, scaler), NoTrainSnapshots);
}

TEST_CASE("the trainer separates an easy stream") {
    // Stable channels have huge capacity and live forever; doomed channels
    // have tiny capacity and force-close two snapshots after they open.
    const int64_t step = 600;
    EventLog warm;
    for (int i = 0; i < 10; ++i)
        warm.events.push_back(testutil::make_open(
            0, "s" + std::to_string(i) + ":0", "sa" + std::to_string(i),
            "sb" + std::to_string(i), 10'000'000));

    EventLog timeline;
    for (int k = 1; k <= 80; ++k) {
        const int64_t ts = k * step;
        if (k >= 3) {
            const std::string id = "d" + std::to_string(k - 2) + ":0";
            timeline.events.push_back(
                testutil::make_close(ts, id, "da" + std::to_string(k - 2),
                                     "db" + std::to_string(k - 2), EventLabel::Forced));
        }
        const std::string id = "d" + std::to_string(k) + ":0";
        timeline.events.push_back(testutil::make_open(ts, id, "da" + std::to_string(k),
                                                      "db" + std::to_string(k), 1000));
    }

    const SplitBoundaries splits = chronological_split(timeline);

    FeatureConfig features;
    features.groups.node = false;
    features.groups.time = false;
    std::vector<std::vector<std::optional<double>>> rows;
    for (const auto& e : warm.events) rows.push_back(edge_numeric_row(e, false));
    for (const auto& e : timeline.events)
        if (e.channel_status == ChannelStatus::Opening && e.gossip_ts <= splits.train_end_ts)
            rows.push_back(edge_numeric_row(e, false));
    const Scaler scaler = Scaler::fit(rows, edge_numeric_names(false));

    TrainConfig cfg;
    cfg.features = features;
    cfg.depth = 1;
    cfg.epochs = 40;
    cfg.lr = 0.05;
    cfg.warmup_steps = 0;
    cfg.weight_decay = 0.0;
    cfg.class_weights = {1.0, 1.0, 1.0};
    cfg.delta_seconds = 2 * step;
    cfg.seed = 1;

    const TrainResult result = train(cfg, warm, timeline, splits, scaler);
    CHECK(result.total_steps > 0);
    CHECK(result.log.back().train_loss < result.log.front().train_loss);

    const MetricsReport report = evaluate_model(result.model, scaler, warm, timeline, splits,
                                                Split::Train, cfg.delta_seconds);
    CHECK(report.per_class[static_cast<int>(Label::Open)].f1 == doctest::Approx(1.0));
    CHECK(report.per_class[static_cast<int>(Label::Forced)].f1 == doctest::Approx(1.0));
    CHECK(report.macro_f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("baselines predict what their name says") {
    Rng rng(19);
    const std::array<double, kNumClasses> point_mass{1.0, 0.0, 0.0};
    for (const Label l : predict_baseline(BaselineKind::Majority, point_mass, 100, rng))
        CHECK(l == Label::Open);
    for (const Label l : predict_baseline(BaselineKind::Stratified, point_mass, 100, rng))
        CHECK(l == Label::Open);

    const std::size_t n = 30000;
    std::array<std::size_t, kNumClasses> uniform_counts{};
    for (const Label l : predict_baseline(BaselineKind::Uniform, point_mass, n, rng))
        ++uniform_counts[static_cast<std::size_t>(l)];
    for (const std::size_t c : uniform_counts)
        CHECK(static_cast<double>(c) / n == doctest::Approx(1.0 / 3.0).epsilon(0.05));

    const std::array<double, kNumClasses> dist{0.5, 0.25, 0.25};
    std::array<std::size_t, kNumClasses> strat_counts{};
    for (const Label l : predict_baseline(BaselineKind::Stratified, dist, n, rng))
        ++strat_counts[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < kNumClasses; ++c)
        CHECK(static_cast<double>(strat_counts[c]) / n == doctest::Approx(dist[c]).epsilon(0.08));

    CHECK(baseline_kind_from_string("uniform") == BaselineKind::Uniform);
    CHECK(baseline_kind_from_string("stratified") == BaselineKind::Stratified);
    CHECK(baseline_kind_from_string("majority") == BaselineKind::Majority);
    CHECK_THROWS_AS(baseline_kind_from_string("oracle"), std::invalid_argument);
    CHECK(std::string(to_string(BaselineKind::Majority)) == "majority");
}

TEST_CASE("attribution on a linear model recovers the exact weight products") {
    MlpModel model;
    model.schema = build_schema(node_only());
    model.depth = 1;
    model.hidden = 1;
    Mat w(kNumClasses, model.schema.dim());
    // Make class 2 dominate so the predicted class is stable across rows.
    for (std::size_t k = 0; k < w.cols; ++k) {
        w.at(0, k) = 0.01 * static_cast<double>(k);
        w.at(1, k) = -0.02;
        w.at(2, k) = 1.0 + 0.1 * static_cast<double>(k);
    }
    model.w.push_back(w);
    model.b.push_back({0.3, -0.1, 0.2});

    Rng rng(20);
    Mat x = random_input(rng, 3, model.schema.dim(), 0.2, 1.0);
    const AttributionReport report = attribute(model, x, 4);

    REQUIRE(report.names == model.schema.names);
    CHECK(report.max_completeness_gap < 1e-9);
    for (std::size_t f = 0; f < report.names.size(); ++f) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += std::abs(w.at(2, f) * x.at(i, f));
        mean /= static_cast<double>(x.rows);
        CHECK(report.mean_abs[f] == doctest::Approx(mean).epsilon(1e-9));
    }
}

TEST_CASE("attribution is exact while the network stays affine along the path") {
    Rng rng(21);
    MlpModel model = MlpModel::init(node_only(), 2, 10, rng);
    // Push every hidden unit firmly into its linear regime for inputs in
    // [0, 1]: biases dominate, so no ReLU boundary is crossed on the path.
    for (double& v : model.w[0].data) v *= 0.1;
    std::fill(model.b[0].begin(), model.b[0].end(), 5.0);

    const Mat x = random_input(rng, 8, model.schema.dim(), 0.0, 1.0);
    const AttributionReport coarse = attribute(model, x, 2);
    CHECK(coarse.max_completeness_gap < 1e-9);
}

TEST_CASE("refining the integration path shrinks the completeness gap") {
    Rng rng(22);
    MlpModel model = MlpModel::init(node_only(), 2, 16, rng);
    const Mat x = random_input(rng, 50, model.schema.dim(), 0.0, 1.0);
    // The midpoint rule is exact between ReLU kinks, so the residual comes
    // from the O(1/m) kink cells and fades as the grid refines.
    const double coarse = attribute(model, x, 8).max_completeness_gap;
    const double fine = attribute(model, x, 4096).max_completeness_gap;
    CHECK(fine < 0.005);
    CHECK(fine < coarse / 20.0);
}

TEST_CASE("attribution aggregates encoder outputs onto their time scalars") {
    Rng rng(23);
    MlpModel model = MlpModel::init(node_and_time(4), 1, 1, rng);
    const Mat x = random_input(rng, 2, model.schema.dim(), -1.0, 1.0);
    const AttributionReport report = attribute(model, x, 8);
    REQUIRE(report.names.size() == model.schema.static_dim() + 3);
    CHECK(report.names[model.schema.static_dim()] == "edge_age");
    CHECK(report.names.back() == "dst_recency");

    const auto ranked = report.ranked();
    for (std::size_t i = 1; i < ranked.size(); ++i)
        CHECK(ranked[i - 1].second >= ranked[i].second);

    const nlohmann::json j = report.to_json();
    CHECK(j.contains("ranking"));
    CHECK(j.contains("max_completeness_gap"));
    CHECK(j.at("ranking").size() == report.names.size());

    CHECK_THROWS_AS(attribute(model, x, 0), std::invalid_argument);
}
