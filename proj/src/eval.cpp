#include "lncb/eval.hpp"

#include <algorithm>
#include <functional>
#include <ostream>

#include "lncb/replay.hpp"

namespace lncb {

namespace {

// Replays the whole timeline once; inside the target split, hands each
// snapshot's truth-labeled instances to `predict`, which fills predictions.
std::vector<PredictionInstance> collect_split_instances(
    const EventLog& warm, const EventLog& timeline, const SplitBoundaries& splits, Split which,
    int64_t delta,
    const std::function<void(const GraphState&, std::vector<PredictionInstance>&)>& predict,
    std::vector<std::size_t>* snapshot_offsets) {
    GraphState state;
    state.apply_events(warm);
    const ClosureIndex index = build_closure_index(timeline, warm);

    std::vector<PredictionInstance> instances;
    for (const TimestampGroup& g : group_by_timestamp(timeline)) {
        const Split s = split_of(splits, g.ts);
        if (static_cast<int>(s) > static_cast<int>(which)) break;
        for (std::size_t e = g.begin; e < g.end; ++e) state.apply_event(timeline.events[e]);
        if (s != which) continue;

        std::vector<PredictionInstance> snapshot;
        for (const auto& [edge, rec] : state.open_edges()) {
            PredictionInstance inst;
            inst.snapshot_ts = g.ts;
            inst.edge = edge;
            inst.truth = index.label_edge(edge, g.ts, delta);
            inst.edge_age_days = static_cast<double>(g.ts - rec.open_gossip_ts) / 86400.0;
            snapshot.push_back(std::move(inst));
        }
        if (snapshot.empty()) continue;
        predict(state, snapshot);
        if (snapshot_offsets) snapshot_offsets->push_back(instances.size());
        instances.insert(instances.end(), snapshot.begin(), snapshot.end());
    }
    return instances;
}

MetricsReport report_for(const std::vector<PredictionInstance>& instances,
                         const std::vector<std::size_t>& snapshot_offsets, Split which,
                         const EvalOptions& opts) {
    if (instances.empty()) throw EmptySplit(which);
    MetricsReport report = f1_report(instances);
    if (!opts.per_snapshot_average) return report;

    // Replace the F1 aggregates with per-snapshot means; confusion counts and
    // age bins stay pooled.
    std::array<double, kNumClasses> f1_sum{};
    std::array<double, kNumClasses> precision_sum{};
    std::array<double, kNumClasses> recall_sum{};
    double macro_sum = 0.0;
    const std::size_t n_snapshots = snapshot_offsets.size();
    for (std::size_t s = 0; s < n_snapshots; ++s) {
        const std::size_t begin = snapshot_offsets[s];
        const std::size_t end = s + 1 < n_snapshots ? snapshot_offsets[s + 1] : instances.size();
        const std::vector<PredictionInstance> part(instances.begin() + static_cast<std::ptrdiff_t>(begin),
                                                   instances.begin() + static_cast<std::ptrdiff_t>(end));
        const ConfusionMatrix cm = confusion(part);
        const auto per_class = per_class_metrics(cm);
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            f1_sum[c] += per_class[c].f1;
            precision_sum[c] += per_class[c].precision;
            recall_sum[c] += per_class[c].recall;
        }
        macro_sum += macro_f1(per_class);
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        report.per_class[c].f1 = f1_sum[c] / static_cast<double>(n_snapshots);
        report.per_class[c].precision = precision_sum[c] / static_cast<double>(n_snapshots);
        report.per_class[c].recall = recall_sum[c] / static_cast<double>(n_snapshots);
    }
    report.macro_f1 = macro_sum / static_cast<double>(n_snapshots);
    return report;
}

}  // namespace

std::array<double, kNumClasses> train_label_distribution(const EventLog& warm,
                                                         const EventLog& timeline,
                                                         const SplitBoundaries& splits,
                                                         int64_t delta) {
    std::array<std::size_t, kNumClasses> counts{};
    const auto count_truth = [&counts](const GraphState&, std::vector<PredictionInstance>& snap) {
        for (const auto& inst : snap) ++counts[static_cast<std::size_t>(inst.truth)];
    };
    collect_split_instances(warm, timeline, splits, Split::Train, delta, count_truth, nullptr);

    std::size_t total = 0;
    for (const std::size_t c : counts) total += c;
    if (total == 0) throw EmptySplit(Split::Train);
    std::array<double, kNumClasses> dist{};
    for (std::size_t c = 0; c < kNumClasses; ++c)
        dist[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
    return dist;
}

MetricsReport evaluate_model(const MlpModel& model, const Scaler& scaler, const EventLog& warm,
                             const EventLog& timeline, const SplitBoundaries& splits, Split which,
                             int64_t delta, const EvalOptions& opts,
                             std::vector<PredictionInstance>* instances_out) {
    FeatureConfig feature_cfg;
    feature_cfg.groups.edge = model.schema.edge_width > 0;
    feature_cfg.groups.node = model.schema.node_width > 0;
    feature_cfg.groups.time = model.schema.time_width > 0;
    feature_cfg.d_time = model.schema.d_time;
    feature_cfg.include_chain_fields =
        model.schema.edge_width > 0 &&
        std::find(model.schema.names.begin(), model.schema.names.end(), "height") !=
            model.schema.names.end();

    const auto predict = [&](const GraphState& state, std::vector<PredictionInstance>& snap) {
        const SnapshotBatch batch =
            assemble_snapshot(state, snap.front().snapshot_ts, scaler, feature_cfg);
        const Mat logits = forward_batch(model, batch);
        // assemble_snapshot iterates open_edges in the same order the
        // instances were collected, so rows align one-to-one.
        for (std::size_t i = 0; i < snap.size(); ++i) {
            const double* z = logits.row(i);
            int pred = 0;
            for (int j = 1; j < kNumClasses; ++j)
                if (z[j] > z[pred]) pred = j;
            snap[i].predicted = static_cast<Label>(pred);
        }
    };

    std::vector<std::size_t> offsets;
    const std::vector<PredictionInstance> instances =
        collect_split_instances(warm, timeline, splits, which, delta, predict, &offsets);
    if (instances_out) *instances_out = instances;
    return report_for(instances, offsets, which, opts);
}

MetricsReport evaluate_baseline(BaselineKind kind, const EventLog& warm,
                                const EventLog& timeline, const SplitBoundaries& splits,
                                Split which, int64_t delta, uint64_t seed,
                                const EvalOptions& opts,
                                std::vector<PredictionInstance>* instances_out) {
    std::array<double, kNumClasses> dist{1.0, 0.0, 0.0};
    if (kind == BaselineKind::Stratified)
        dist = train_label_distribution(warm, timeline, splits, delta);

    Rng rng(seed);
    const auto predict = [&](const GraphState&, std::vector<PredictionInstance>& snap) {
        const std::vector<Label> preds = predict_baseline(kind, dist, snap.size(), rng);
        for (std::size_t i = 0; i < snap.size(); ++i) snap[i].predicted = preds[i];
    };

    std::vector<std::size_t> offsets;
    const std::vector<PredictionInstance> instances =
        collect_split_instances(warm, timeline, splits, which, delta, predict, &offsets);
    if (instances_out) *instances_out = instances;
    return report_for(instances, offsets, which, opts);
}

std::vector<SweepRow> sweep_delta(const TrainConfig& cfg, const EventLog& warm,
                                  const EventLog& timeline, const SplitBoundaries& splits,
                                  const Scaler& scaler, const std::vector<double>& delta_days) {
    std::vector<SweepRow> rows;
    for (const double days : delta_days) {
        TrainConfig per_delta = cfg;
        per_delta.delta_seconds = static_cast<int64_t>(std::llround(days * 86400.0));

        SweepRow row;
        row.delta_days = days;
        const TrainResult trained = train(per_delta, warm, timeline, splits, scaler);
        row.mlp = evaluate_model(trained.model, scaler, warm, timeline, splits, Split::Test,
                                 per_delta.delta_seconds);
        row.stratified = evaluate_baseline(BaselineKind::Stratified, warm, timeline, splits,
                                           Split::Test, per_delta.delta_seconds, cfg.seed);
        row.gap = row.mlp.macro_f1 - row.stratified.macro_f1;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "delta_days,mlp_macro_f1,stratified_macro_f1,gap\n";
    for (const auto& row : rows)
        out << row.delta_days << ',' << row.mlp.macro_f1 << ',' << row.stratified.macro_f1 << ','
            << row.gap << '\n';
}

}  // namespace lncb
