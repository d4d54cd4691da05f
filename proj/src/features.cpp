#include "lncb/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lncb {

namespace {

const std::array<const char*, 6> kPolicyNumerics = {
    "fee_base_msat", "fee_rate_milli_msat", "min_htlc",
    "max_htlc_msat", "time_lock_delta",     "last_update"};

const std::array<const char*, 5> kImplNames = {"lnd", "cln", "eclair", "ldk", "other"};

std::optional<double> opt_d(const std::optional<int64_t>& v) {
    if (!v) return std::nullopt;
    return static_cast<double>(*v);
}

void policy_numerics(const PolicySnapshot& p, std::vector<std::optional<double>>& out) {
    out.push_back(opt_d(p.fee_base_msat));
    out.push_back(opt_d(p.fee_rate_milli_msat));
    out.push_back(opt_d(p.min_htlc));
    out.push_back(opt_d(p.max_htlc_msat));
    out.push_back(opt_d(p.time_lock_delta));
    out.push_back(opt_d(p.last_update));
}

}  // namespace

std::vector<std::string> edge_numeric_names(bool include_chain_fields) {
    std::vector<std::string> names = {"capacity", "block_avg_fee_rate"};
    if (include_chain_fields) {
        names.push_back("height");
        names.push_back("chain_ts");
    }
    for (const char* dir : {"src_", "dst_"})
        for (const char* f : kPolicyNumerics) names.push_back(std::string(dir) + f);
    return names;
}

std::vector<std::optional<double>> edge_numeric_row(const GossipEvent& e,
                                                    bool include_chain_fields) {
    std::vector<std::optional<double>> row;
    row.reserve(include_chain_fields ? 16 : 14);
    row.emplace_back(static_cast<double>(e.capacity));
    row.emplace_back(e.block_avg_fee_rate);
    if (include_chain_fields) {
        row.emplace_back(static_cast<double>(e.height));
        row.emplace_back(static_cast<double>(e.chain_ts));
    }
    policy_numerics(e.src_policy, row);
    policy_numerics(e.dst_policy, row);
    return row;
}

// --- Scaler -----------------------------------------------------------------

Scaler Scaler::fit(const std::vector<std::vector<std::optional<double>>>& rows,
                   std::vector<std::string> names) {
    if (rows.empty()) throw EmptyTrainingSet();
    const std::size_t width = names.size();
    Scaler s;
    s.names_ = std::move(names);
    s.mins_.assign(width, 0.0);
    s.maxs_.assign(width, 0.0);

    std::vector<bool> seen(width, false);
    for (const auto& row : rows) {
        if (row.size() != width)
            throw SchemaMismatch("scaler fit row width " + std::to_string(row.size()) +
                                 ", expected " + std::to_string(width));
        for (std::size_t i = 0; i < width; ++i) {
            if (!row[i]) continue;
            const double v = std::log1p(std::max(0.0, *row[i]));
            if (!seen[i]) {
                s.mins_[i] = s.maxs_[i] = v;
                seen[i] = true;
            } else {
                s.mins_[i] = std::min(s.mins_[i], v);
                s.maxs_[i] = std::max(s.maxs_[i], v);
            }
        }
    }
    // Constant (or never-present) features get a unit range so the transform
    // collapses them to 0 instead of dividing by zero.
    for (std::size_t i = 0; i < width; ++i)
        if (s.maxs_[i] <= s.mins_[i]) s.maxs_[i] = s.mins_[i] + 1.0;
    return s;
}

double Scaler::transform_value(std::size_t i, const std::optional<double>& raw) const {
    if (!raw) return 0.0;
    const double v = std::log1p(std::max(0.0, *raw));
    const double scaled = (v - mins_[i]) / (maxs_[i] - mins_[i]);
    return std::clamp(scaled, kClampLo, kClampHi);
}

std::vector<double> Scaler::transform(const std::vector<std::optional<double>>& row) const {
    if (row.size() != names_.size())
        throw SchemaMismatch("transform row width " + std::to_string(row.size()) +
                             ", expected " + std::to_string(names_.size()));
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = transform_value(i, row[i]);
    return out;
}

nlohmann::json Scaler::to_json() const {
    return nlohmann::json{
        {"format_version", 1}, {"names", names_}, {"mins", mins_}, {"maxs", maxs_}};
}

Scaler Scaler::from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("unsupported scaler version");
    Scaler s;
    s.names_ = j.at("names").get<std::vector<std::string>>();
    s.mins_ = j.at("mins").get<std::vector<double>>();
    s.maxs_ = j.at("maxs").get<std::vector<double>>();
    if (s.mins_.size() != s.names_.size() || s.maxs_.size() != s.names_.size())
        throw SchemaMismatch("scaler JSON arrays disagree on width");
    return s;
}

// --- TimeEncoder --------------------------------------------------------------

TimeEncoder::TimeEncoder(int d_time) {
    omega.resize(static_cast<std::size_t>(d_time));
    phase.assign(static_cast<std::size_t>(d_time), 0.0);
    // Geometric ladder from 1 cycle/day down to 1 cycle/1000 days, so the
    // bank spans hours-to-years before any training.
    const double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < d_time; ++i) {
        const double expo = d_time > 1 ? -3.0 * i / (d_time - 1) : 0.0;
        omega[static_cast<std::size_t>(i)] = two_pi * std::pow(10.0, expo);
    }
}

void TimeEncoder::encode(double delta_days, double* out) const {
    for (std::size_t i = 0; i < omega.size(); ++i)
        out[i] = std::cos(omega[i] * delta_days + phase[i]);
}

std::vector<double> TimeEncoder::encode(double delta_days) const {
    std::vector<double> out(omega.size());
    encode(delta_days, out.data());
    return out;
}

void TimeEncoder::grad(double delta_days, double* d_omega, double* d_phase) const {
    for (std::size_t i = 0; i < omega.size(); ++i) {
        const double s = std::sin(omega[i] * delta_days + phase[i]);
        d_omega[i] = -s * delta_days;
        d_phase[i] = -s;
    }
}

// --- Schema -------------------------------------------------------------------

FeatureSchema build_schema(const FeatureConfig& cfg) {
    FeatureSchema schema;
    schema.d_time = cfg.groups.time ? cfg.d_time : 0;

    if (cfg.groups.edge) {
        schema.edge_offset = schema.names.size();
        for (auto& n : edge_numeric_names(cfg.include_chain_fields)) schema.names.push_back(n);
        for (const char* dir : {"src_", "dst_"}) {
            for (const char* f : kPolicyNumerics)
                schema.names.push_back(std::string(dir) + f + "_missing");
            schema.names.push_back(std::string(dir) + "disabled_missing");
        }
        schema.names.push_back("src_disabled");
        schema.names.push_back("dst_disabled");
        for (const char* dir : {"src_", "dst_"})
            for (const char* impl : kImplNames)
                schema.names.push_back(std::string(dir) + "impl_" + impl);
        schema.edge_width = schema.names.size() - schema.edge_offset;
    }

    if (cfg.groups.node) {
        schema.node_offset = schema.names.size();
        for (const char* dir : {"src_", "dst_"})
            for (const char* c : {"count_open", "count_forced", "count_mutual"})
                schema.names.push_back(std::string(dir) + c);
        schema.node_width = schema.names.size() - schema.node_offset;
    }

    if (cfg.groups.time) {
        schema.time_offset = schema.names.size();
        for (const char* scalar : {"edge_age", "src_recency", "dst_recency"})
            for (int i = 0; i < cfg.d_time; ++i)
                schema.names.push_back(std::string(scalar) + "_" + std::to_string(i));
        schema.time_width = schema.names.size() - schema.time_offset;
    }
    return schema;
}

nlohmann::json FeatureSchema::to_json() const {
    return nlohmann::json{{"format_version", 1},
                          {"names", names},
                          {"edge_offset", edge_offset},
                          {"edge_width", edge_width},
                          {"node_offset", node_offset},
                          {"node_width", node_width},
                          {"time_offset", time_offset},
                          {"time_width", time_width},
                          {"d_time", d_time}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("unsupported schema version");
    FeatureSchema s;
    s.names = j.at("names").get<std::vector<std::string>>();
    s.edge_offset = j.at("edge_offset").get<std::size_t>();
    s.edge_width = j.at("edge_width").get<std::size_t>();
    s.node_offset = j.at("node_offset").get<std::size_t>();
    s.node_width = j.at("node_width").get<std::size_t>();
    s.time_offset = j.at("time_offset").get<std::size_t>();
    s.time_width = j.at("time_width").get<std::size_t>();
    s.d_time = j.at("d_time").get<int>();
    return s;
}

// --- Assembly ------------------------------------------------------------------

namespace {

void write_policy_indicators(const PolicySnapshot& p, double*& out) {
    *out++ = p.fee_base_msat ? 0.0 : 1.0;
    *out++ = p.fee_rate_milli_msat ? 0.0 : 1.0;
    *out++ = p.min_htlc ? 0.0 : 1.0;
    *out++ = p.max_htlc_msat ? 0.0 : 1.0;
    *out++ = p.time_lock_delta ? 0.0 : 1.0;
    *out++ = p.last_update ? 0.0 : 1.0;
    *out++ = p.disabled ? 0.0 : 1.0;
}

void write_impl_onehot(Implementation impl, double*& out) {
    for (int k = 0; k < 5; ++k) *out++ = static_cast<int>(impl) == k ? 1.0 : 0.0;
}

double log_count(const std::map<std::string, NodeStats>& stats, const std::string& node,
                 int64_t NodeStats::* field) {
    auto it = stats.find(node);
    return it == stats.end() ? 0.0 : std::log1p(static_cast<double>(it->second.*field));
}

}  // namespace

void assemble_row(const OpenEdgeRecord& rec, const EdgeKey& key, const GraphState& state,
                  int64_t t, const Scaler& scaler, const FeatureConfig& cfg, double* out_static,
                  double* out_time) {
    const GossipEvent& e = rec.opening_event;
    double* out = out_static;

    if (cfg.groups.edge) {
        const auto raw = edge_numeric_row(e, cfg.include_chain_fields);
        if (raw.size() != scaler.size())
            throw SchemaMismatch("scaler was fitted for " + std::to_string(scaler.size()) +
                                 " numerics, edge row has " + std::to_string(raw.size()));
        for (std::size_t i = 0; i < raw.size(); ++i) *out++ = scaler.transform_value(i, raw[i]);
        write_policy_indicators(e.src_policy, out);
        write_policy_indicators(e.dst_policy, out);
        *out++ = e.src_policy.disabled.value_or(false) ? 1.0 : 0.0;
        *out++ = e.dst_policy.disabled.value_or(false) ? 1.0 : 0.0;
        write_impl_onehot(e.src_policy.implementation, out);
        write_impl_onehot(e.dst_policy.implementation, out);
    }

    if (cfg.groups.node) {
        const auto& stats = state.node_stats();
        for (const std::string* node : {&key.first, &key.second}) {
            *out++ = log_count(stats, *node, &NodeStats::count_open);
            *out++ = log_count(stats, *node, &NodeStats::count_forced);
            *out++ = log_count(stats, *node, &NodeStats::count_mutual);
        }
    }

    out_time[0] = static_cast<double>(t - rec.open_gossip_ts) / 86400.0;
    out_time[1] = static_cast<double>(state.recency(key.first, t)) / 86400.0;
    out_time[2] = static_cast<double>(state.recency(key.second, t)) / 86400.0;
}

SnapshotBatch assemble_snapshot(const GraphState& state, int64_t t, const Scaler& scaler,
                                const FeatureConfig& cfg) {
    const FeatureSchema schema = build_schema(cfg);
    const auto& open = state.open_edges();

    SnapshotBatch batch;
    batch.snapshot_ts = t;
    batch.edges.reserve(open.size());
    std::vector<const OpenEdgeRecord*> recs;
    recs.reserve(open.size());
    for (const auto& [key, rec] : open) {
        batch.edges.push_back(key);
        recs.push_back(&rec);
    }

    const std::size_t n = batch.edges.size();
    batch.static_x = Mat(n, schema.static_dim());
    batch.time_scalars = Mat(n, 3);
    batch.edge_age_days.resize(n);

    const std::ptrdiff_t pn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for
    for (std::ptrdiff_t i = 0; i < pn; ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        assemble_row(*recs[u], batch.edges[u], state, t, scaler, cfg, batch.static_x.row(u),
                     batch.time_scalars.row(u));
        batch.edge_age_days[u] = batch.time_scalars.at(u, 0);
    }
    return batch;
}

Mat encode_full(const SnapshotBatch& batch, const TimeEncoder& enc,
                const FeatureSchema& schema) {
    const std::size_t n = batch.size();
    if (batch.static_x.cols != schema.static_dim())
        throw SchemaMismatch("batch static width does not match schema");
    Mat x(n, schema.dim());
    const int d = schema.d_time;
    const std::ptrdiff_t pn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for
    for (std::ptrdiff_t i = 0; i < pn; ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        double* xi = x.row(u);
        const double* si = batch.static_x.row(u);
        for (std::size_t k = 0; k < schema.static_dim(); ++k) xi[k] = si[k];
        if (d > 0) {
            double* time_block = xi + schema.time_offset;
            for (int s = 0; s < 3; ++s)
                enc.encode(batch.time_scalars.at(u, static_cast<std::size_t>(s)),
                           time_block + static_cast<std::size_t>(s) * static_cast<std::size_t>(d));
        }
    }
    return x;
}

std::vector<double> assemble(const OpenEdgeRecord& rec, const EdgeKey& key,
                             const GraphState& state, int64_t t, const Scaler& scaler,
                             const TimeEncoder& enc, const FeatureConfig& cfg) {
    if (!state.open_edges().count(key)) throw EdgeNotOpen(key.first, key.second);
    const FeatureSchema schema = build_schema(cfg);
    std::vector<double> out(schema.dim(), 0.0);
    double time_scalars[3];
    assemble_row(rec, key, state, t, scaler, cfg, out.data(), time_scalars);
    if (schema.d_time > 0) {
        double* time_block = out.data() + schema.time_offset;
        for (int s = 0; s < 3; ++s)
            enc.encode(time_scalars[s],
                       time_block + static_cast<std::size_t>(s) *
                                        static_cast<std::size_t>(schema.d_time));
    }
    return out;
}

}  // namespace lncb
