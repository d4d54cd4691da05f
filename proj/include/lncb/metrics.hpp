#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lncb/labeling.hpp"

namespace lncb {

class EmptyInstances : public std::runtime_error {
public:
    EmptyInstances() : std::runtime_error("no prediction instances") {}
};

// One (open edge, snapshot) prediction.
struct PredictionInstance {
    int64_t snapshot_ts = 0;
    EdgeKey edge;
    Label predicted = Label::Open;
    Label truth = Label::Open;
    double edge_age_days = 0.0;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct ConfusionMatrix {
    std::array<std::array<int64_t, kNumClasses>, kNumClasses> counts{};      // [true][pred]
    std::array<std::array<double, kNumClasses>, kNumClasses> normalized{};   // row-normalized
    std::array<bool, kNumClasses> empty_row{};                               // no support
};

struct AgeBinRow {
    double lo_days = 0.0;
    double hi_days = 0.0;  // infinity for the last bin
    std::size_t support = 0;
    std::array<ClassMetrics, kNumClasses> per_class{};
    double macro_f1 = 0.0;
};

struct MetricsReport {
    std::size_t instances = 0;
    std::array<ClassMetrics, kNumClasses> per_class{};
    double macro_f1 = 0.0;
    ConfusionMatrix confusion;
    std::vector<AgeBinRow> age_bins;
};

inline const std::vector<double> kDefaultAgeBinEdges = {0.0, 30.0, 90.0, 180.0, 365.0};

ConfusionMatrix confusion(const std::vector<PredictionInstance>& instances);

// Per-class one-vs-rest precision/recall/F1 straight from confusion counts.
// F1 is 0 whenever precision + recall is 0.
std::array<ClassMetrics, kNumClasses> per_class_metrics(const ConfusionMatrix& cm);
double macro_f1(const std::array<ClassMetrics, kNumClasses>& per_class);

std::vector<AgeBinRow> age_binned_f1(const std::vector<PredictionInstance>& instances,
                                     const std::vector<double>& bin_edges_days = kDefaultAgeBinEdges);

// Full report: per-class metrics, macro-F1, confusion, age bins.
MetricsReport f1_report(const std::vector<PredictionInstance>& instances,
                        const std::vector<double>& bin_edges_days = kDefaultAgeBinEdges);

nlohmann::json to_json(const MetricsReport& report);

void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out);
void write_age_bins_csv(const std::vector<AgeBinRow>& bins, std::ostream& out);

}  // namespace lncb
