#include "lncb/metrics.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace lncb {

ConfusionMatrix confusion(const std::vector<PredictionInstance>& instances) {
    if (instances.empty()) throw EmptyInstances();
    ConfusionMatrix cm;
    for (const auto& inst : instances)
        ++cm.counts[static_cast<std::size_t>(inst.truth)][static_cast<std::size_t>(inst.predicted)];
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        int64_t row_sum = 0;
        for (std::size_t j = 0; j < kNumClasses; ++j) row_sum += cm.counts[i][j];
        cm.empty_row[i] = row_sum == 0;
        for (std::size_t j = 0; j < kNumClasses; ++j)
            cm.normalized[i][j] =
                row_sum == 0 ? 0.0
                             : static_cast<double>(cm.counts[i][j]) / static_cast<double>(row_sum);
    }
    return cm;
}

std::array<ClassMetrics, kNumClasses> per_class_metrics(const ConfusionMatrix& cm) {
    std::array<ClassMetrics, kNumClasses> out{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        int64_t tp = cm.counts[c][c];
        int64_t fp = 0, fn = 0;
        for (std::size_t k = 0; k < kNumClasses; ++k) {
            if (k == c) continue;
            fp += cm.counts[k][c];
            fn += cm.counts[c][k];
        }
        ClassMetrics& m = out[c];
        m.support = static_cast<std::size_t>(tp + fn);
        m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        m.f1 = m.precision + m.recall == 0.0
                   ? 0.0
                   : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return out;
}

double macro_f1(const std::array<ClassMetrics, kNumClasses>& per_class) {
    double sum = 0.0;
    for (const auto& m : per_class) sum += m.f1;
    return sum / kNumClasses;
}

std::vector<AgeBinRow> age_binned_f1(const std::vector<PredictionInstance>& instances,
                                     const std::vector<double>& bin_edges_days) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<AgeBinRow> bins;
    for (std::size_t b = 0; b < bin_edges_days.size(); ++b) {
        AgeBinRow row;
        row.lo_days = bin_edges_days[b];
        row.hi_days = b + 1 < bin_edges_days.size() ? bin_edges_days[b + 1] : inf;
        bins.push_back(row);
    }

    std::vector<std::vector<PredictionInstance>> buckets(bins.size());
    for (const auto& inst : instances) {
        for (std::size_t b = 0; b < bins.size(); ++b) {
            if (inst.edge_age_days >= bins[b].lo_days && inst.edge_age_days < bins[b].hi_days) {
                buckets[b].push_back(inst);
                break;
            }
        }
    }

    for (std::size_t b = 0; b < bins.size(); ++b) {
        bins[b].support = buckets[b].size();
        if (buckets[b].empty()) continue;
        const ConfusionMatrix cm = confusion(buckets[b]);
        bins[b].per_class = per_class_metrics(cm);
        bins[b].macro_f1 = macro_f1(bins[b].per_class);
    }
    return bins;
}

MetricsReport f1_report(const std::vector<PredictionInstance>& instances,
                        const std::vector<double>& bin_edges_days) {
    if (instances.empty()) throw EmptyInstances();
    MetricsReport report;
    report.instances = instances.size();
    report.confusion = confusion(instances);
    report.per_class = per_class_metrics(report.confusion);
    report.macro_f1 = macro_f1(report.per_class);
    report.age_bins = age_binned_f1(instances, bin_edges_days);
    return report;
}

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json per_class = nlohmann::json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto& m = report.per_class[c];
        per_class[to_string(static_cast<Label>(c))] = {{"precision", m.precision},
                                                       {"recall", m.recall},
                                                       {"f1", m.f1},
                                                       {"support", m.support}};
    }

    nlohmann::json confusion_counts = nlohmann::json::array();
    nlohmann::json confusion_norm = nlohmann::json::array();
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        confusion_counts.push_back(report.confusion.counts[i]);
        confusion_norm.push_back(report.confusion.normalized[i]);
    }

    nlohmann::json bins = nlohmann::json::array();
    for (const auto& bin : report.age_bins) {
        nlohmann::json row = {{"lo_days", bin.lo_days},
                              {"support", bin.support},
                              {"macro_f1", bin.macro_f1}};
        row["hi_days"] = std::isinf(bin.hi_days) ? nlohmann::json() : nlohmann::json(bin.hi_days);
        nlohmann::json f1s = nlohmann::json::object();
        for (std::size_t c = 0; c < kNumClasses; ++c)
            f1s[to_string(static_cast<Label>(c))] = bin.per_class[c].f1;
        row["f1"] = std::move(f1s);
        bins.push_back(std::move(row));
    }

    return nlohmann::json{{"instances", report.instances},
                          {"macro_f1", report.macro_f1},
                          {"per_class", std::move(per_class)},
                          {"confusion_counts", std::move(confusion_counts)},
                          {"confusion_normalized", std::move(confusion_norm)},
                          {"age_bins", std::move(bins)}};
}

void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out) {
    out << "true_class";
    for (std::size_t j = 0; j < kNumClasses; ++j)
        out << ",pred_" << to_string(static_cast<Label>(j));
    out << '\n';
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        out << to_string(static_cast<Label>(i));
        for (std::size_t j = 0; j < kNumClasses; ++j) out << ',' << cm.normalized[i][j];
        out << '\n';
    }
}

void write_age_bins_csv(const std::vector<AgeBinRow>& bins, std::ostream& out) {
    out << "lo_days,hi_days,support,f1_open,f1_forced,f1_mutual,macro_f1\n";
    for (const auto& bin : bins) {
        out << bin.lo_days << ',';
        if (std::isinf(bin.hi_days))
            out << "inf";
        else
            out << bin.hi_days;
        out << ',' << bin.support;
        for (std::size_t c = 0; c < kNumClasses; ++c) out << ',' << bin.per_class[c].f1;
        out << ',' << bin.macro_f1 << '\n';
    }
}

}  // namespace lncb
