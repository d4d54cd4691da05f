#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lncb/event.hpp"
#include "lncb/labeling.hpp"
#include "lncb/metrics.hpp"
#include "lncb/model.hpp"

namespace lncb {

class EmptySplit : public std::runtime_error {
public:
    explicit EmptySplit(Split s)
        : std::runtime_error(std::string("no snapshot timestamps in the ") + to_string(s) +
                             " split") {}
};

struct EvalOptions {
    // When set, per-class F1 and macro-F1 are means over per-snapshot reports
    // instead of one report over all instances pooled.
    bool per_snapshot_average = false;
};

// Instance-level label distribution of the train split (replayed and labeled
// exactly like training steps, before any capping or downsampling).
std::array<double, kNumClasses> train_label_distribution(const EventLog& warm,
                                                         const EventLog& timeline,
                                                         const SplitBoundaries& splits,
                                                         int64_t delta);

// Replays events up to each snapshot inside the chosen split, predicts every
// open edge with the model, and scores the pooled instances.
MetricsReport evaluate_model(const MlpModel& model, const Scaler& scaler, const EventLog& warm,
                             const EventLog& timeline, const SplitBoundaries& splits, Split which,
                             int64_t delta, const EvalOptions& opts = {},
                             std::vector<PredictionInstance>* instances_out = nullptr);

// Same replay, predictions drawn from the baseline instead of a model.
MetricsReport evaluate_baseline(BaselineKind kind, const EventLog& warm,
                                const EventLog& timeline, const SplitBoundaries& splits,
                                Split which, int64_t delta, uint64_t seed,
                                const EvalOptions& opts = {},
                                std::vector<PredictionInstance>* instances_out = nullptr);

struct SweepRow {
    double delta_days = 0.0;
    MetricsReport mlp;
    MetricsReport stratified;
    double gap = 0.0;  // mlp macro-F1 minus stratified macro-F1
};

// Retrains and evaluates at each lookahead horizon; labels are rebuilt per
// horizon. Baseline seed reuses cfg.seed.
std::vector<SweepRow> sweep_delta(const TrainConfig& cfg, const EventLog& warm,
                                  const EventLog& timeline, const SplitBoundaries& splits,
                                  const Scaler& scaler, const std::vector<double>& delta_days);

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

}  // namespace lncb
