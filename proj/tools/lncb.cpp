// Command-line front end: one subcommand per pipeline stage so every stage
// can be re-run from the previous stage's persisted artifacts.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "lncb/eval.hpp"
#include "lncb/ingest.hpp"
#include "lncb/model.hpp"
#include "lncb/replay.hpp"
#include "lncb/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --- small file helpers -----------------------------------------------------

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lncb::IngestError("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    return out;
}

// --- flag value parsing -------------------------------------------------------

std::vector<double> parse_csv_doubles(const std::string& s, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string(flag) + ": bad number '" + item + "'");
        }
    }
    if (out.empty()) throw std::invalid_argument(std::string(flag) + ": empty list");
    return out;
}

std::pair<double, double> parse_splits(const std::string& s) {
    const auto f = parse_csv_doubles(s, "--splits");
    if (f.size() != 3) throw std::invalid_argument("--splits needs three fractions");
    for (const double v : f)
        if (!(v > 0.0)) throw std::invalid_argument("--splits fractions must be > 0");
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
        throw std::invalid_argument("--splits fractions must sum to 1");
    return {f[0], f[1]};
}

lncb::FeatureGroups parse_groups(const std::string& s) {
    lncb::FeatureGroups g{false, false, false};
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "edge")
            g.edge = true;
        else if (item == "node")
            g.node = true;
        else if (item == "time")
            g.time = true;
        else
            throw std::invalid_argument("--groups: unknown group '" + item + "'");
    }
    if (!g.edge && !g.node && !g.time)
        throw std::invalid_argument("--groups must enable at least one of edge,node,time");
    return g;
}

lncb::Split parse_split_name(const std::string& s) {
    if (s == "val") return lncb::Split::Val;
    if (s == "test") return lncb::Split::Test;
    if (s == "train") return lncb::Split::Train;
    throw std::invalid_argument("--split must be train, val, or test");
}

// --- persisted pipeline artifacts ---------------------------------------------

struct BuiltData {
    lncb::EventLog warm;
    lncb::EventLog timeline;
    lncb::SplitBoundaries splits;
    int64_t delta_seconds = 0;
    lncb::Scaler scaler{};
};

BuiltData load_build_dir(const std::string& dir) {
    BuiltData data;
    data.warm = lncb::parse_events_file((fs::path(dir) / "warm.jsonl").string(),
                                        lncb::LogFormat::Jsonl);
    data.timeline = lncb::parse_events_file((fs::path(dir) / "timeline.jsonl").string(),
                                            lncb::LogFormat::Jsonl);
    const json s = read_json_file((fs::path(dir) / "splits.json").string());
    data.splits.train_end_ts = s.at("train_end_ts").get<int64_t>();
    data.splits.val_end_ts = s.at("val_end_ts").get<int64_t>();
    data.splits.data_end_ts = s.at("data_end_ts").get<int64_t>();
    data.delta_seconds = s.at("delta_seconds").get<int64_t>();
    data.scaler = lncb::Scaler::from_json(read_json_file((fs::path(dir) / "scaler.json").string()));
    return data;
}

// Shared flag set for subcommands that train models.
struct TrainFlags {
    std::string data_dir;
    std::string out_dir;
    double delta_days = 0.0;  // 0 = use the build directory's value
    std::string class_weights = "1,5,5";
    double downsample_ratio = 0.0;
    std::size_t max_open_edges = 0;
    int depth = 2;
    int hidden = 128;
    int d_time = 128;
    int epochs = 30;
    double lr = 1e-4;
    double weight_decay = 1e-5;
    int warmup_steps = 1000;
    std::string groups = "edge,node,time";
    std::string seeds = "0";
    bool include_chain = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--data", f.data_dir, "Build directory with persisted dataset artifacts")
        ->required();
    cmd->add_option("--out", f.out_dir, "Output directory")->required();
    cmd->add_option("--delta-days", f.delta_days,
                    "Lookahead window in days (default: value stored by build)");
    cmd->add_option("--class-weights", f.class_weights,
                    "Loss weights open,forced,mutual; or 'inverse' for inverse train frequency");
    cmd->add_option("--downsample-ratio", f.downsample_ratio,
                    "Open rows kept per closing row each step (0 = no downsampling)");
    cmd->add_option("--max-open-edges-per-step", f.max_open_edges,
                    "Cap on open rows per training step (0 = unlimited)");
    cmd->add_option("--depth", f.depth, "Number of linear layers (1 = logistic regression)")
        ->check(CLI::Range(1, 3));
    cmd->add_option("--hidden", f.hidden, "Hidden layer width");
    cmd->add_option("--d-time", f.d_time, "Time encoding dimension per scalar");
    cmd->add_option("--epochs", f.epochs, "Training epochs");
    cmd->add_option("--lr", f.lr, "Peak learning rate");
    cmd->add_option("--weight-decay", f.weight_decay, "Decoupled weight decay");
    cmd->add_option("--warmup-steps", f.warmup_steps, "Linear warmup steps");
    cmd->add_option("--groups", f.groups, "Enabled feature groups, e.g. edge,node,time");
    cmd->add_option("--seed", f.seeds, "Single training seed");
    cmd->add_option("--seeds", f.seeds, "Comma-separated training seeds");
    cmd->add_flag("--include-chain-features", f.include_chain,
                  "Add block height and chain timestamp to the edge features");
    cmd->set_config("--config", "", "Read options from a key=value file");
}

lncb::TrainConfig make_train_config(const TrainFlags& f, const BuiltData& data,
                                    uint64_t seed) {
    lncb::TrainConfig cfg;
    cfg.epochs = f.epochs;
    cfg.lr = f.lr;
    cfg.weight_decay = f.weight_decay;
    cfg.warmup_steps = f.warmup_steps;
    cfg.seed = seed;
    cfg.delta_seconds = f.delta_days > 0.0
                            ? static_cast<int64_t>(std::llround(f.delta_days * 86400.0))
                            : data.delta_seconds;
    cfg.depth = f.depth;
    cfg.hidden = f.hidden;
    cfg.features.groups = parse_groups(f.groups);
    cfg.features.d_time = f.d_time;
    cfg.features.include_chain_fields = f.include_chain;
    if (f.downsample_ratio > 0.0) cfg.downsample_ratio = f.downsample_ratio;
    if (f.max_open_edges > 0) cfg.max_open_edges_per_step = f.max_open_edges;

    if (f.class_weights == "inverse") {
        const auto dist = lncb::train_label_distribution(data.warm, data.timeline, data.splits,
                                                         cfg.delta_seconds);
        for (int c = 0; c < lncb::kNumClasses; ++c) {
            if (dist[c] <= 0.0)
                throw std::invalid_argument(
                    "inverse class weights need every class present in the train split");
            cfg.class_weights[c] = dist[0] / dist[c];
        }
    } else {
        const auto w = parse_csv_doubles(f.class_weights, "--class-weights");
        if (w.size() != static_cast<std::size_t>(lncb::kNumClasses))
            throw std::invalid_argument("--class-weights needs three values");
        for (int c = 0; c < lncb::kNumClasses; ++c)
            cfg.class_weights[c] = w[static_cast<std::size_t>(c)];
    }
    return cfg;
}

std::vector<uint64_t> parse_seeds(const std::string& s) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            seeds.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw std::invalid_argument("--seeds: bad seed '" + item + "'");
        }
    }
    if (seeds.empty()) throw std::invalid_argument("--seeds: empty list");
    return seeds;
}

json report_summary_json(const lncb::MetricsReport& report) { return lncb::to_json(report); }

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double acc = 0.0;
    for (const double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

// --- subcommand bodies -----------------------------------------------------------

int cmd_ingest(const std::string& input, const std::string& format, const std::string& out_dir,
               bool strict, bool no_filter) {
    lncb::ParseDiagnostics diag;
    lncb::ParseOptions opts;
    opts.strict = strict;
    lncb::EventLog log =
        lncb::parse_events_file(input, lncb::log_format_from_string(format), &diag, opts);
    lncb::FilterStats filter;
    if (!no_filter) log = lncb::filter_parallel_channels(log, &filter);

    fs::create_directories(out_dir);
    lncb::serialize_events_file(log, (fs::path(out_dir) / "events.jsonl").string(),
                                lncb::LogFormat::Jsonl);

    json rejected = json::array();
    for (const auto& r : diag.rejected) rejected.push_back({{"row", r.row}, {"reason", r.reason}});
    const json report{{"source", input},
                      {"rows_parsed", log.meta.rows_parsed},
                      {"rows_rejected", log.meta.rows_rejected},
                      {"duplicates_dropped", log.meta.duplicates_dropped},
                      {"twins_synthesized", log.meta.twins_synthesized},
                      {"events_after_filter", log.events.size()},
                      {"parallel_filter",
                       {{"applied", !no_filter},
                        {"pairs_total", filter.pairs_total},
                        {"pairs_removed", filter.pairs_removed},
                        {"events_removed", filter.events_removed}}},
                      {"rejected_rows", std::move(rejected)}};
    write_json_file(fs::path(out_dir) / "ingest_report.json", report);
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_stats(const std::string& input, const std::string& format, bool no_filter) {
    lncb::ParseDiagnostics diag;
    lncb::EventLog log = lncb::parse_events_file(input, lncb::log_format_from_string(format), &diag);
    lncb::FilterStats filter;
    if (!no_filter) log = lncb::filter_parallel_channels(log, &filter);
    const std::size_t events_before =
        log.events.size() + (no_filter ? 0 : filter.events_removed);

    const lncb::DatasetStats stats = lncb::dataset_stats(log);
    const lncb::WarmSplit split = lncb::split_warm_start(log);

    json j = lncb::to_json(stats);
    j["warm_events"] = split.warm.events.size();
    j["timeline_events"] = split.timeline.events.size();
    j["meta"] = {{"rows_parsed", log.meta.rows_parsed},
                 {"rows_rejected", log.meta.rows_rejected},
                 {"duplicates_dropped", log.meta.duplicates_dropped},
                 {"twins_synthesized", log.meta.twins_synthesized}};
    j["parallel_filter"] = {
        {"applied", !no_filter},
        {"pairs_total", filter.pairs_total},
        {"pairs_removed", filter.pairs_removed},
        {"events_removed", filter.events_removed},
        {"fraction_events_removed",
         events_before == 0 ? 0.0
                            : static_cast<double>(filter.events_removed) /
                                  static_cast<double>(events_before)}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_build(const std::string& input, const std::string& format, const std::string& out_dir,
              double delta_days, const std::string& splits_arg, bool no_filter,
              bool include_chain) {
    const auto [train_frac, val_frac] = parse_splits(splits_arg);
    lncb::EventLog log = lncb::parse_events_file(input, lncb::log_format_from_string(format));
    lncb::FilterStats filter;
    if (!no_filter) log = lncb::filter_parallel_channels(log, &filter);
    const lncb::WarmSplit warm_split = lncb::split_warm_start(log);
    const lncb::EventLog& warm = warm_split.warm;
    const lncb::EventLog& timeline = warm_split.timeline;

    const lncb::SplitBoundaries splits =
        lncb::chronological_split(timeline, train_frac, val_frac);
    const int64_t delta = static_cast<int64_t>(std::llround(delta_days * 86400.0));

    // Scaler training rows: opening events inside the train window.
    std::vector<std::vector<std::optional<double>>> scaler_rows;
    for (const auto& e : timeline.events) {
        if (e.gossip_ts > splits.train_end_ts) break;
        if (e.channel_status == lncb::ChannelStatus::Opening)
            scaler_rows.push_back(lncb::edge_numeric_row(e, include_chain));
    }
    const lncb::Scaler scaler =
        lncb::Scaler::fit(scaler_rows, lncb::edge_numeric_names(include_chain));

    fs::create_directories(out_dir);
    lncb::serialize_events_file(warm, (fs::path(out_dir) / "warm.jsonl").string(),
                                lncb::LogFormat::Jsonl);
    lncb::serialize_events_file(timeline, (fs::path(out_dir) / "timeline.jsonl").string(),
                                lncb::LogFormat::Jsonl);
    write_json_file(fs::path(out_dir) / "scaler.json", scaler.to_json());
    write_json_file(fs::path(out_dir) / "splits.json",
                    json{{"train_end_ts", splits.train_end_ts},
                         {"val_end_ts", splits.val_end_ts},
                         {"data_end_ts", splits.data_end_ts},
                         {"delta_seconds", delta},
                         {"fractions", {train_frac, val_frac, 1.0 - train_frac - val_frac}}});

    // Labeled snapshots per split, plus both label-distribution aggregations:
    // per (edge, snapshot) instance and per edge at its first appearance.
    const lncb::ClosureIndex index = lncb::build_closure_index(timeline, warm);
    lncb::GraphState state;
    state.apply_events(warm);

    std::array<std::ofstream, 3> label_files;
    std::array<std::array<std::size_t, lncb::kNumClasses>, 3> instance_counts{};
    std::array<std::map<lncb::EdgeKey, lncb::Label>, 3> first_label;
    std::array<std::size_t, 3> snapshot_counts{};
    for (int s = 0; s < 3; ++s) {
        const auto name = std::string("labels_") + lncb::to_string(static_cast<lncb::Split>(s)) + ".csv";
        label_files[static_cast<std::size_t>(s)] = open_out(fs::path(out_dir) / name);
        label_files[static_cast<std::size_t>(s)] << "snapshot_ts,src,dst,label\n";
    }
    for (const lncb::TimestampGroup& g : lncb::group_by_timestamp(timeline)) {
        for (std::size_t e = g.begin; e < g.end; ++e) state.apply_event(timeline.events[e]);
        const auto s = static_cast<std::size_t>(lncb::split_of(splits, g.ts));
        const auto labels = lncb::label_snapshot(state, index, delta);
        if (!labels.empty()) ++snapshot_counts[s];
        for (const auto& [edge, label] : labels) {
            label_files[s] << g.ts << ',' << edge.first << ',' << edge.second << ','
                           << lncb::to_string(label) << '\n';
            ++instance_counts[s][static_cast<std::size_t>(label)];
            first_label[s].emplace(edge, label);
        }
    }

    const auto distribution_json = [](const std::array<std::size_t, lncb::kNumClasses>& counts) {
        std::size_t total = 0;
        for (const std::size_t c : counts) total += c;
        json per_class = json::object();
        for (int c = 0; c < lncb::kNumClasses; ++c) {
            const std::size_t n = counts[static_cast<std::size_t>(c)];
            per_class[lncb::to_string(static_cast<lncb::Label>(c))] = {
                {"count", n},
                {"fraction",
                 total == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(total)}};
        }
        return json{{"total", total}, {"per_class", std::move(per_class)}};
    };

    json splits_summary = json::object();
    for (int s = 0; s < 3; ++s) {
        const auto us = static_cast<std::size_t>(s);
        std::array<std::size_t, lncb::kNumClasses> edge_counts{};
        for (const auto& [edge, label] : first_label[us])
            ++edge_counts[static_cast<std::size_t>(label)];
        splits_summary[lncb::to_string(static_cast<lncb::Split>(s))] = {
            {"snapshots", snapshot_counts[us]},
            {"instances", distribution_json(instance_counts[us])},
            {"distinct_edges_first_label", distribution_json(edge_counts)}};
    }

    const lncb::LifetimeStats lifetimes = lncb::closure_lifetime_stats(warm, timeline, delta);
    const json summary{
        {"dataset", lncb::to_json(lncb::dataset_stats(log))},
        {"warm_events", warm.events.size()},
        {"timeline_events", timeline.events.size()},
        {"parallel_filter",
         {{"applied", !no_filter},
          {"pairs_removed", filter.pairs_removed},
          {"events_removed", filter.events_removed}}},
        {"labels", std::move(splits_summary)},
        {"closed_channel_lifetimes",
         {{"closed_channels", lifetimes.closed_channels},
          {"median_days", lifetimes.median_lifetime_days},
          {"fraction_within_delta", lifetimes.fraction_closed_within}}},
        {"include_chain_features", include_chain}};
    write_json_file(fs::path(out_dir) / "build_summary.json", summary);
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_train(const TrainFlags& flags) {
    const BuiltData data = load_build_dir(flags.data_dir);
    const std::vector<uint64_t> seeds = parse_seeds(flags.seeds);
    fs::create_directories(flags.out_dir);

    json per_seed = json::array();
    std::vector<double> best_vals;
    for (const uint64_t seed : seeds) {
        const lncb::TrainConfig cfg = make_train_config(flags, data, seed);
        const lncb::TrainResult result =
            lncb::train(cfg, data.warm, data.timeline, data.splits, data.scaler);

        const std::string suffix = seeds.size() > 1 ? "_seed" + std::to_string(seed) : "";
        write_json_file(fs::path(flags.out_dir) / ("checkpoint" + suffix + ".json"),
                        lncb::checkpoint_json(result.model, cfg));
        auto log_out = open_out(fs::path(flags.out_dir) / ("train_log" + suffix + ".jsonl"));
        for (const auto& epoch : result.log) {
            log_out << json{{"epoch", epoch.epoch},
                            {"train_loss", epoch.train_loss},
                            {"val_macro_f1", epoch.val_macro_f1},
                            {"val_f1_open", epoch.val_f1[0]},
                            {"val_f1_forced", epoch.val_f1[1]},
                            {"val_f1_mutual", epoch.val_f1[2]},
                            {"lr", epoch.lr_last},
                            {"steps", epoch.steps}}
                           .dump()
                    << '\n';
        }
        best_vals.push_back(result.best_val_macro_f1);
        per_seed.push_back({{"seed", seed},
                            {"best_epoch", result.best_epoch},
                            {"best_val_macro_f1", result.best_val_macro_f1},
                            {"total_steps", result.total_steps},
                            {"capped_open_fraction", result.capped_open_fraction}});
    }

    double mean = 0.0;
    for (const double v : best_vals) mean += v;
    mean /= static_cast<double>(best_vals.size());
    const json summary{{"seeds", per_seed},
                       {"val_macro_f1_mean", mean},
                       {"val_macro_f1_std", sample_std(best_vals, mean)}};
    write_json_file(fs::path(flags.out_dir) / "train_summary.json", summary);
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_evaluate(const std::string& data_dir, const std::vector<std::string>& model_paths,
                 const std::string& split_name, double delta_days, bool per_snapshot,
                 const std::string& out_dir) {
    const BuiltData data = load_build_dir(data_dir);
    const lncb::Split which = parse_split_name(split_name);
    lncb::EvalOptions opts;
    opts.per_snapshot_average = per_snapshot;

    json per_model = json::array();
    std::vector<double> macros;
    lncb::MetricsReport last_report;
    for (const std::string& path : model_paths) {
        lncb::TrainConfig cfg;
        const lncb::MlpModel model = lncb::load_checkpoint(read_json_file(path), &cfg);
        const int64_t delta = delta_days > 0.0
                                  ? static_cast<int64_t>(std::llround(delta_days * 86400.0))
                                  : cfg.delta_seconds;
        last_report = lncb::evaluate_model(model, data.scaler, data.warm, data.timeline,
                                           data.splits, which, delta, opts);
        macros.push_back(last_report.macro_f1);
        per_model.push_back({{"model", path}, {"report", report_summary_json(last_report)}});
    }

    double mean = 0.0;
    for (const double m : macros) mean += m;
    mean /= static_cast<double>(macros.size());
    json out{{"split", split_name},
             {"models", per_model},
             {"macro_f1_mean", mean},
             {"macro_f1_std", sample_std(macros, mean)}};

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json_file(fs::path(out_dir) / "report.json", out);
        auto confusion_out = open_out(fs::path(out_dir) / "confusion.csv");
        lncb::write_confusion_csv(last_report.confusion, confusion_out);
        auto bins_out = open_out(fs::path(out_dir) / "age_bins.csv");
        lncb::write_age_bins_csv(last_report.age_bins, bins_out);
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_baseline(const std::string& data_dir, const std::string& kind_name,
                 const std::string& split_name, double delta_days, uint64_t seed,
                 bool per_snapshot, const std::string& out_dir) {
    const BuiltData data = load_build_dir(data_dir);
    const lncb::BaselineKind kind = lncb::baseline_kind_from_string(kind_name);
    const lncb::Split which = parse_split_name(split_name);
    const int64_t delta = delta_days > 0.0
                              ? static_cast<int64_t>(std::llround(delta_days * 86400.0))
                              : data.delta_seconds;
    lncb::EvalOptions opts;
    opts.per_snapshot_average = per_snapshot;
    const lncb::MetricsReport report = lncb::evaluate_baseline(
        kind, data.warm, data.timeline, data.splits, which, delta, seed, opts);

    json out{{"baseline", kind_name}, {"split", split_name}, {"report", report_summary_json(report)}};
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json_file(fs::path(out_dir) / ("baseline_" + kind_name + ".json"), out);
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_sweep(const TrainFlags& flags, const std::string& deltas_arg) {
    const BuiltData data = load_build_dir(flags.data_dir);
    const std::vector<double> deltas = parse_csv_doubles(deltas_arg, "--deltas");
    const std::vector<uint64_t> seeds = parse_seeds(flags.seeds);
    const lncb::TrainConfig cfg = make_train_config(flags, data, seeds.front());

    const std::vector<lncb::SweepRow> rows =
        lncb::sweep_delta(cfg, data.warm, data.timeline, data.splits, data.scaler, deltas);

    fs::create_directories(flags.out_dir);
    auto csv = open_out(fs::path(flags.out_dir) / "sweep.csv");
    lncb::write_sweep_csv(rows, csv);

    json out = json::array();
    for (const auto& row : rows)
        out.push_back({{"delta_days", row.delta_days},
                       {"mlp_macro_f1", row.mlp.macro_f1},
                       {"stratified_macro_f1", row.stratified.macro_f1},
                       {"gap", row.gap}});
    write_json_file(fs::path(flags.out_dir) / "sweep.json", out);
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_attribute(const std::string& data_dir, const std::string& model_path,
                  const std::string& split_name, int steps, std::size_t sample_cap,
                  uint64_t seed, const std::string& out_dir) {
    const BuiltData data = load_build_dir(data_dir);
    lncb::TrainConfig cfg;
    const lncb::MlpModel model = lncb::load_checkpoint(read_json_file(model_path), &cfg);
    const lncb::Split which = parse_split_name(split_name);

    lncb::FeatureConfig feature_cfg = cfg.features;

    // Reservoir-sample encoded rows across the split so the sample is
    // deterministic and memory stays bounded.
    lncb::Mat sample(0, model.input_dim());
    sample.data.reserve(sample_cap * model.input_dim());
    std::size_t seen = 0;
    lncb::Rng rng(seed);
    lncb::GraphState state;
    state.apply_events(data.warm);
    for (const lncb::TimestampGroup& g : lncb::group_by_timestamp(data.timeline)) {
        const lncb::Split s = lncb::split_of(data.splits, g.ts);
        if (static_cast<int>(s) > static_cast<int>(which)) break;
        for (std::size_t e = g.begin; e < g.end; ++e)
            state.apply_event(data.timeline.events[e]);
        if (s != which) continue;
        const lncb::SnapshotBatch batch =
            lncb::assemble_snapshot(state, g.ts, data.scaler, feature_cfg);
        const lncb::Mat x = lncb::encode_full(batch, model.encoder, model.schema);
        for (std::size_t i = 0; i < x.rows; ++i) {
            ++seen;
            if (sample.rows < sample_cap) {
                sample.data.insert(sample.data.end(), x.row(i), x.row(i) + x.cols);
                ++sample.rows;
            } else {
                const std::size_t j = static_cast<std::size_t>(rng.uniform_int(seen));
                if (j < sample_cap)
                    std::copy(x.row(i), x.row(i) + x.cols, sample.row(j));
            }
        }
    }
    if (sample.rows == 0) throw lncb::EmptySplit(which);

    const lncb::AttributionReport report = lncb::attribute(model, sample, steps);
    json out = report.to_json();
    out["rows_sampled"] = sample.rows;
    out["rows_seen"] = seen;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json_file(fs::path(out_dir) / "attribution.json", out);
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_synth(const lncb::SynthParams& params, const std::string& out_dir,
              const std::string& format) {
    const lncb::LogFormat fmt = lncb::log_format_from_string(format);
    const lncb::SynthResult result = lncb::generate(params);
    fs::create_directories(out_dir);
    const std::string events_name = fmt == lncb::LogFormat::Csv ? "events.csv" : "events.jsonl";
    lncb::serialize_events_file(result.log, (fs::path(out_dir) / events_name).string(), fmt);
    auto schedule_out = open_out(fs::path(out_dir) / "schedule.csv");
    lncb::write_schedule_csv(result.schedule, schedule_out);
    auto reliability_out = open_out(fs::path(out_dir) / "reliability.csv");
    reliability_out << "node,reliability\n";
    for (std::size_t i = 0; i < result.reliability.size(); ++i)
        reliability_out << lncb::synth_node_name(static_cast<int>(i)) << ','
                        << result.reliability[i] << '\n';

    const json summary{{"events", result.log.events.size()},
                       {"scheduled_closures", result.schedule.size()},
                       {"nodes", result.reliability.size()},
                       {"output", (fs::path(out_dir) / events_name).string()}};
    write_json_file(fs::path(out_dir) / "synth_summary.json", summary);
    std::cout << summary.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("LNCB_THREADS")) {
        const int n = std::atoi(threads);
        if (n > 0) omp_set_num_threads(n);
    }

    CLI::App app{"Gossip-replay channel-closure prediction pipeline"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse, validate, and normalize an event log");
    std::string in_input, in_format = "csv", in_out;
    bool in_strict = false, in_no_filter = false;
    ingest->add_option("--input", in_input, "Input event log")->required();
    ingest->add_option("--format", in_format, "Input format: csv or jsonl");
    ingest->add_option("--out", in_out, "Output directory")->required();
    ingest->add_flag("--strict", in_strict, "Fail on the first malformed row");
    ingest->add_flag("--no-filter-parallel", in_no_filter,
                     "Keep node pairs with parallel channels");
    ingest->set_config("--config", "", "Read options from a key=value file");

    // stats
    auto* stats = app.add_subcommand("stats", "Print dataset statistics as JSON");
    std::string st_input, st_format = "csv";
    bool st_no_filter = false;
    stats->add_option("--input", st_input, "Input event log")->required();
    stats->add_option("--format", st_format, "Input format: csv or jsonl");
    stats->add_flag("--no-filter-parallel", st_no_filter,
                    "Keep node pairs with parallel channels");
    stats->set_config("--config", "", "Read options from a key=value file");

    // build
    auto* build = app.add_subcommand(
        "build", "Split chronologically, fit the scaler, and emit labeled snapshots");
    std::string b_input, b_format = "csv", b_out, b_splits = "0.70,0.15,0.15";
    double b_delta_days = 180.0;
    bool b_no_filter = false, b_include_chain = false;
    build->add_option("--input", b_input, "Input event log")->required();
    build->add_option("--format", b_format, "Input format: csv or jsonl");
    build->add_option("--out", b_out, "Output directory")->required();
    build->add_option("--delta-days", b_delta_days, "Lookahead window in days");
    build->add_option("--splits", b_splits, "Train,val,test fractions of the time span");
    build->add_flag("--no-filter-parallel", b_no_filter,
                    "Keep node pairs with parallel channels");
    build->add_flag("--include-chain-features", b_include_chain,
                    "Add block height and chain timestamp to the edge features");
    build->set_config("--config", "", "Read options from a key=value file");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the classifier on built artifacts");
    TrainFlags train_flags;
    add_train_flags(train_cmd, train_flags);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Score checkpoints on a split");
    std::string ev_data, ev_split = "test", ev_out;
    std::vector<std::string> ev_models;
    double ev_delta_days = 0.0;
    bool ev_per_snapshot = false;
    evaluate->add_option("--data", ev_data, "Build directory")->required();
    evaluate->add_option("--model", ev_models, "Checkpoint path (repeat or comma-separate)")
        ->required()
        ->delimiter(',');
    evaluate->add_option("--split", ev_split, "Split to score: train, val, or test");
    evaluate->add_option("--delta-days", ev_delta_days,
                         "Lookahead override (default: checkpoint value)");
    evaluate->add_flag("--per-snapshot-average", ev_per_snapshot,
                       "Average F1 over snapshots instead of pooling instances");
    evaluate->add_option("--out", ev_out, "Directory for report.json and CSV exports");
    evaluate->set_config("--config", "", "Read options from a key=value file");

    // baseline
    auto* baseline = app.add_subcommand("baseline", "Score a label-only baseline on a split");
    std::string ba_data, ba_kind = "stratified", ba_split = "test", ba_out;
    double ba_delta_days = 0.0;
    uint64_t ba_seed = 0;
    bool ba_per_snapshot = false;
    baseline->add_option("--data", ba_data, "Build directory")->required();
    baseline->add_option("--kind", ba_kind, "uniform, stratified, or majority");
    baseline->add_option("--split", ba_split, "Split to score: train, val, or test");
    baseline->add_option("--delta-days", ba_delta_days,
                         "Lookahead override (default: build value)");
    baseline->add_option("--seed", ba_seed, "Sampling seed");
    baseline->add_flag("--per-snapshot-average", ba_per_snapshot,
                       "Average F1 over snapshots instead of pooling instances");
    baseline->add_option("--out", ba_out, "Output directory");
    baseline->set_config("--config", "", "Read options from a key=value file");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Retrain and score across lookahead horizons");
    TrainFlags sweep_flags;
    std::string sw_deltas = "30,90,180,365";
    add_train_flags(sweep, sweep_flags);
    sweep->add_option("--deltas", sw_deltas, "Comma-separated lookahead horizons in days");

    // attribute
    auto* attribute = app.add_subcommand("attribute", "Rank features by attribution magnitude");
    std::string at_data, at_model, at_split = "test", at_out;
    int at_steps = 32;
    std::size_t at_sample = 2000;
    uint64_t at_seed = 0;
    attribute->add_option("--data", at_data, "Build directory")->required();
    attribute->add_option("--model", at_model, "Checkpoint path")->required();
    attribute->add_option("--split", at_split, "Split to sample: train, val, or test");
    attribute->add_option("--steps", at_steps, "Path interpolation steps");
    attribute->add_option("--sample", at_sample, "Instance sample size");
    attribute->add_option("--seed", at_seed, "Sampling seed");
    attribute->add_option("--out", at_out, "Output directory");
    attribute->set_config("--config", "", "Read options from a key=value file");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic gossip stream");
    lncb::SynthParams sp;
    std::string sy_out, sy_format = "csv";
    synth->add_option("--nodes", sp.n_nodes, "Node count");
    synth->add_option("--span-days", sp.span_days, "Timeline length in days");
    synth->add_option("--snapshots-per-day", sp.snapshots_per_day, "Snapshot frequency");
    synth->add_option("--open-rate", sp.open_rate, "Expected channel openings per snapshot");
    synth->add_option("--warm-channels", sp.warm_channels, "Channels in the initial snapshot");
    synth->add_option("--h0", sp.h0, "Daily closure hazard scale");
    synth->add_option("--forced-mix", sp.forced_mix, "Share of closures that are forced");
    synth->add_option("--mix-slope", sp.mix_slope,
                      "Tilt of the forced share by pair unreliability (0 = independent)");
    synth->add_option("--penalty-rate", sp.penalty_rate,
                      "Share of forced closures gossiped as penalty");
    synth->add_option("--missing-rate", sp.missing_rate, "Per-field missing probability");
    synth->add_option("--seed", sp.seed, "Generator seed");
    synth->add_option("--t0", sp.t0, "First snapshot timestamp (unix seconds)");
    synth->add_option("--out", sy_out, "Output directory")->required();
    synth->add_option("--format", sy_format, "Event output format: csv or jsonl");
    synth->set_config("--config", "", "Read options from a key=value file");

    ingest->callback([&] { cmd_ingest(in_input, in_format, in_out, in_strict, in_no_filter); });
    stats->callback([&] { cmd_stats(st_input, st_format, st_no_filter); });
    build->callback([&] {
        cmd_build(b_input, b_format, b_out, b_delta_days, b_splits, b_no_filter, b_include_chain);
    });
    train_cmd->callback([&] { cmd_train(train_flags); });
    evaluate->callback([&] {
        cmd_evaluate(ev_data, ev_models, ev_split, ev_delta_days, ev_per_snapshot, ev_out);
    });
    baseline->callback([&] {
        cmd_baseline(ba_data, ba_kind, ba_split, ba_delta_days, ba_seed, ba_per_snapshot, ba_out);
    });
    sweep->callback([&] { cmd_sweep(sweep_flags, sw_deltas); });
    attribute->callback(
        [&] { cmd_attribute(at_data, at_model, at_split, at_steps, at_sample, at_seed, at_out); });
    synth->callback([&] { cmd_synth(sp, sy_out, sy_format); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const lncb::IngestError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const lncb::DegenerateTimeline& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const lncb::EmptySplit& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const lncb::EmptyInstances& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const lncb::EmptyTrainingSet& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const lncb::NoTrainSnapshots& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
