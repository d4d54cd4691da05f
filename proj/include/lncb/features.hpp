#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lncb/kernels.hpp"
#include "lncb/state.hpp"

namespace lncb {

class EmptyTrainingSet : public std::runtime_error {
public:
    EmptyTrainingSet() : std::runtime_error("scaler fit requires at least one row") {}
};

class SchemaMismatch : public std::runtime_error {
public:
    explicit SchemaMismatch(const std::string& what) : std::runtime_error(what) {}
};

class EdgeNotOpen : public std::runtime_error {
public:
    EdgeNotOpen(const std::string& src, const std::string& dst)
        : std::runtime_error("edge not open: " + src + "->" + dst) {}
};

struct FeatureGroups {
    bool edge = true;
    bool node = true;
    bool time = true;
};

struct FeatureConfig {
    FeatureGroups groups;
    int d_time = 128;
    // Chain metadata (height, chain timestamp) as extra numeric edge
    // features. Off by default; the usual inputs are the policy fields.
    bool include_chain_fields = false;
};

// Names of the scaled numeric edge features, in schema order.
std::vector<std::string> edge_numeric_names(bool include_chain_fields);

// Raw numeric values for one open edge, aligned with edge_numeric_names.
// Empty optionals are policy fields the gossip record never carried.
std::vector<std::optional<double>> edge_numeric_row(const GossipEvent& e,
                                                    bool include_chain_fields);

// Per-feature log1p + min-max normalization, fitted on train-split rows only.
class Scaler {
public:
    static constexpr double kClampLo = -0.5;
    static constexpr double kClampHi = 1.5;

    static Scaler fit(const std::vector<std::vector<std::optional<double>>>& rows,
                      std::vector<std::string> names);

    // Scaled value for feature i; missing values scale to 0.
    double transform_value(std::size_t i, const std::optional<double>& raw) const;

    // Whole-row transform with schema check. Missing entries come back as 0.
    std::vector<double> transform(const std::vector<std::optional<double>>& row) const;

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    double min_at(std::size_t i) const { return mins_[i]; }
    double max_at(std::size_t i) const { return maxs_[i]; }

    nlohmann::json to_json() const;
    static Scaler from_json(const nlohmann::json& j);

private:
    std::vector<std::string> names_;
    std::vector<double> mins_;  // of log1p-transformed train values
    std::vector<double> maxs_;
};

// Learnable cosine encoding of a time delta: out_i = cos(omega_i * d + b_i)
// with d the delta in days. One encoder is shared by all three time scalars.
class TimeEncoder {
public:
    TimeEncoder() = default;
    explicit TimeEncoder(int d_time);  // geometric frequency ladder, zero phase

    int dim() const { return static_cast<int>(omega.size()); }
    void encode(double delta_days, double* out) const;
    std::vector<double> encode(double delta_days) const;

    // d out_i / d omega_i and d out_i / d b_i at the given delta.
    void grad(double delta_days, double* d_omega, double* d_phase) const;

    std::vector<double> omega;  // rad per day
    std::vector<double> phase;

    bool operator==(const TimeEncoder&) const = default;
};

// Frozen feature layout. Offsets are into the fully encoded vector
// [edge block | node block | time block]; disabled groups have width 0.
struct FeatureSchema {
    std::vector<std::string> names;
    std::size_t edge_offset = 0, edge_width = 0;
    std::size_t node_offset = 0, node_width = 0;
    std::size_t time_offset = 0, time_width = 0;  // 3 * d_time when enabled
    int d_time = 0;

    std::size_t dim() const { return names.size(); }
    std::size_t static_dim() const { return edge_width + node_width; }

    nlohmann::json to_json() const;
    static FeatureSchema from_json(const nlohmann::json& j);
};

FeatureSchema build_schema(const FeatureConfig& cfg);

// One evaluation/training snapshot: all open edges at a timestamp with the
// static feature blocks and the raw time scalars. Time encodings are applied
// later so the encoder can keep learning between snapshots.
struct SnapshotBatch {
    int64_t snapshot_ts = 0;
    std::vector<EdgeKey> edges;
    Mat static_x;      // n x (edge_width + node_width)
    Mat time_scalars;  // n x 3: edge_age, src_recency, dst_recency, in days
    std::vector<double> edge_age_days;

    std::size_t size() const { return edges.size(); }
};

// Static blocks + time scalars for one open edge. out_static must hold
// schema.static_dim() values, out_time 3.
void assemble_row(const OpenEdgeRecord& rec, const EdgeKey& key, const GraphState& state,
                  int64_t t, const Scaler& scaler, const FeatureConfig& cfg, double* out_static,
                  double* out_time);

SnapshotBatch assemble_snapshot(const GraphState& state, int64_t t, const Scaler& scaler,
                                const FeatureConfig& cfg);

// Full encoded design matrix in schema layout (static blocks verbatim, time
// scalars expanded through the encoder).
Mat encode_full(const SnapshotBatch& batch, const TimeEncoder& enc, const FeatureSchema& schema);

// Single fully-encoded vector for one edge (the assemble contract used by
// attribution and spot checks).
std::vector<double> assemble(const OpenEdgeRecord& rec, const EdgeKey& key,
                             const GraphState& state, int64_t t, const Scaler& scaler,
                             const TimeEncoder& enc, const FeatureConfig& cfg);

}  // namespace lncb
