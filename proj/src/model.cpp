#include "lncb/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "lncb/replay.hpp"

namespace lncb {

namespace {

// --- base64 for bit-exact weight round trips -------------------------------

constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::vector<unsigned char>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
        i += 3;
    }
    const std::size_t rem = bytes.size() - i;
    if (rem == 1) {
        const unsigned v = bytes[i] << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rem == 2) {
        const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<unsigned char> b64_decode(const std::string& s) {
    int rev[256];
    std::fill(std::begin(rev), std::end(rev), -1);
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64Alphabet[i])] = i;

    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    unsigned acc = 0;
    int bits = 0;
    for (const char c : s) {
        if (c == '=') break;
        const int v = rev[static_cast<unsigned char>(c)];
        if (v < 0) throw std::runtime_error("invalid base64 character in checkpoint");
        acc = (acc << 6) | static_cast<unsigned>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

std::string doubles_to_b64(const std::vector<double>& v) {
    std::vector<unsigned char> bytes;
    bytes.reserve(v.size() * 8);
    for (const double d : v) {
        const uint64_t u = std::bit_cast<uint64_t>(d);
        for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<unsigned char>((u >> (8 * k)) & 0xFF));
    }
    return b64_encode(bytes);
}

std::vector<double> b64_to_doubles(const std::string& s) {
    const std::vector<unsigned char> bytes = b64_decode(s);
    if (bytes.size() % 8 != 0) throw std::runtime_error("checkpoint blob is not a multiple of 8 bytes");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        uint64_t u = 0;
        for (int k = 0; k < 8; ++k) u |= static_cast<uint64_t>(bytes[i * 8 + static_cast<std::size_t>(k)]) << (8 * k);
        out[i] = std::bit_cast<double>(u);
    }
    return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

// First k entries of a partial Fisher-Yates shuffle, returned unsorted.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t k,
                                                    Rng& rng) {
    k = std::min(k, pool.size());
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace

// --- TrainConfig ------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (warmup_steps < 0) throw std::invalid_argument("warmup_steps must be >= 0");
    for (const double w : class_weights)
        if (!(w > 0.0)) throw std::invalid_argument("class weights must be > 0");
    if (downsample_ratio && !(*downsample_ratio > 0.0))
        throw std::invalid_argument("downsample ratio must be > 0");
    if (max_open_edges_per_step && *max_open_edges_per_step < 1)
        throw std::invalid_argument("max_open_edges_per_step must be >= 1");
    if (delta_seconds <= 0) throw std::invalid_argument("delta must be > 0");
    if (depth < 1 || depth > 3) throw std::invalid_argument("depth must be 1, 2, or 3");
    if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
    if (features.groups.time && features.d_time < 1)
        throw std::invalid_argument("d_time must be >= 1");
    if (!features.groups.edge && !features.groups.node && !features.groups.time)
        throw std::invalid_argument("at least one feature group must be enabled");
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j{{"epochs", epochs},
                     {"lr", lr},
                     {"weight_decay", weight_decay},
                     {"warmup_steps", warmup_steps},
                     {"class_weights", class_weights},
                     {"seed", seed},
                     {"delta_seconds", delta_seconds},
                     {"depth", depth},
                     {"hidden", hidden},
                     {"features",
                      {{"edge", features.groups.edge},
                       {"node", features.groups.node},
                       {"time", features.groups.time},
                       {"d_time", features.d_time},
                       {"include_chain_fields", features.include_chain_fields}}}};
    j["downsample_ratio"] = downsample_ratio ? nlohmann::json(*downsample_ratio) : nlohmann::json();
    j["max_open_edges_per_step"] =
        max_open_edges_per_step ? nlohmann::json(*max_open_edges_per_step) : nlohmann::json();
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.epochs = j.at("epochs").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.warmup_steps = j.at("warmup_steps").get<int>();
    cfg.class_weights = j.at("class_weights").get<std::array<double, kNumClasses>>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.delta_seconds = j.at("delta_seconds").get<int64_t>();
    cfg.depth = j.at("depth").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    const auto& f = j.at("features");
    cfg.features.groups.edge = f.at("edge").get<bool>();
    cfg.features.groups.node = f.at("node").get<bool>();
    cfg.features.groups.time = f.at("time").get<bool>();
    cfg.features.d_time = f.at("d_time").get<int>();
    cfg.features.include_chain_fields = f.at("include_chain_fields").get<bool>();
    if (auto it = j.find("downsample_ratio"); it != j.end() && !it->is_null())
        cfg.downsample_ratio = it->get<double>();
    if (auto it = j.find("max_open_edges_per_step"); it != j.end() && !it->is_null())
        cfg.max_open_edges_per_step = it->get<std::size_t>();
    return cfg;
}

// --- model ------------------------------------------------------------------

MlpModel MlpModel::init(const FeatureConfig& cfg, int depth, int hidden, Rng& rng) {
    MlpModel m;
    m.schema = build_schema(cfg);
    if (m.schema.dim() == 0) throw std::invalid_argument("feature schema is empty");
    if (cfg.groups.time) m.encoder = TimeEncoder(cfg.d_time);
    m.depth = depth;
    m.hidden = hidden;

    std::vector<std::size_t> dims;
    dims.push_back(m.schema.dim());
    for (int l = 0; l < depth - 1; ++l) dims.push_back(static_cast<std::size_t>(hidden));
    dims.push_back(kNumClasses);

    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double bound = std::sqrt(1.0 / static_cast<double>(dims[l]));
        Mat w(dims[l + 1], dims[l]);
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        std::vector<double> bias(dims[l + 1]);
        for (double& v : bias) v = rng.uniform(-bound, bound);
        m.w.push_back(std::move(w));
        m.b.push_back(std::move(bias));
    }
    return m;
}

Mat forward(const MlpModel& model, const Mat& x, ForwardCache* cache) {
    if (x.cols != model.input_dim())
        throw ShapeMismatch("input width " + std::to_string(x.cols) + ", model expects " +
                            std::to_string(model.input_dim()));
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    const std::size_t layers = model.w.size();
    c.a.assign(layers, Mat());
    c.z.assign(layers, Mat());
    c.a[0] = x;
    for (std::size_t l = 0; l < layers; ++l) {
        kernels::linear_forward(c.a[l], model.w[l], model.b[l], c.z[l]);
        if (l + 1 < layers) kernels::relu_forward(c.z[l], c.a[l + 1]);
    }
    return c.z[layers - 1];
}

Mat forward_batch(const MlpModel& model, const SnapshotBatch& batch, ForwardCache* cache) {
    return forward(model, encode_full(batch, model.encoder, model.schema), cache);
}

Gradients backward(const MlpModel& model, const ForwardCache& cache, const Mat& dlogits,
                   const Mat* time_scalars) {
    const std::size_t layers = model.w.size();
    Gradients g;
    g.w.resize(layers);
    g.b.resize(layers);

    Mat dz = dlogits;
    Mat da;
    for (std::size_t l = layers; l-- > 0;) {
        kernels::linear_backward(cache.a[l], model.w[l], dz, da, g.w[l], g.b[l]);
        if (l > 0) kernels::relu_backward(cache.z[l - 1], da, dz);
    }

    g.omega.assign(model.encoder.omega.size(), 0.0);
    g.phase.assign(model.encoder.phase.size(), 0.0);
    if (model.schema.time_width > 0) {
        if (!time_scalars || time_scalars->rows != da.rows || time_scalars->cols != 3)
            throw ShapeMismatch("time scalars missing or misshapen for encoder backward");
        const int d = model.schema.d_time;
        const std::size_t off = model.schema.time_offset;
        const std::ptrdiff_t pd = d;
#pragma omp parallel for
        for (std::ptrdiff_t k = 0; k < pd; ++k) {
            const std::size_t uk = static_cast<std::size_t>(k);
            double g_omega = 0.0, g_phase = 0.0;
            for (std::size_t i = 0; i < da.rows; ++i) {
                for (std::size_t s = 0; s < 3; ++s) {
                    const double delta = time_scalars->at(i, s);
                    const double sv =
                        std::sin(model.encoder.omega[uk] * delta + model.encoder.phase[uk]);
                    const double gx =
                        da.at(i, off + s * static_cast<std::size_t>(d) + uk);
                    g_omega += gx * (-sv * delta);
                    g_phase += gx * (-sv);
                }
            }
            g.omega[uk] = g_omega;
            g.phase[uk] = g_phase;
        }
    }
    return g;
}

Mat input_gradient(const MlpModel& model, const ForwardCache& cache, const Mat& dlogits) {
    Mat dz = dlogits;
    Mat da;
    Mat dw_scratch;
    std::vector<double> db_scratch;
    for (std::size_t l = model.w.size(); l-- > 0;) {
        kernels::linear_backward(cache.a[l], model.w[l], dz, da, dw_scratch, db_scratch);
        if (l > 0) kernels::relu_backward(cache.z[l - 1], da, dz);
    }
    return da;
}

// --- loss and sampling --------------------------------------------------------

LossResult weighted_ce_loss(const Mat& logits, const std::vector<int>& labels,
                            const std::array<double, kNumClasses>& weights,
                            const std::vector<std::size_t>& rows) {
    if (logits.cols != kNumClasses) throw ShapeMismatch("logits must have 3 columns");
    if (labels.size() != logits.rows) throw ShapeMismatch("labels/logits row mismatch");
    if (rows.empty()) throw EmptyBatchAfterDownsampling();

    LossResult r;
    r.dlogits = Mat(logits.rows, logits.cols);
    r.rows_included = rows.size();
    const double inv_n = 1.0 / static_cast<double>(rows.size());

    double loss = 0.0;
    for (const std::size_t i : rows) {
        const int y = labels[i];
        if (y < 0 || y >= kNumClasses) throw ShapeMismatch("label out of range");
        const double* z = logits.row(i);
        double zmax = z[0];
        for (std::size_t j = 1; j < kNumClasses; ++j) zmax = std::max(zmax, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < kNumClasses; ++j) sum += std::exp(z[j] - zmax);
        const double wy = weights[static_cast<std::size_t>(y)];
        loss += wy * -(z[y] - zmax - std::log(sum));
        double* dl = r.dlogits.row(i);
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            const double p = std::exp(z[j] - zmax) / sum;
            dl[j] = wy * (p - (static_cast<int>(j) == y ? 1.0 : 0.0)) * inv_n;
        }
    }
    r.loss = loss * inv_n;
    return r;
}

LossResult weighted_ce_loss(const Mat& logits, const std::vector<int>& labels,
                            const std::array<double, kNumClasses>& weights) {
    return weighted_ce_loss(logits, labels, weights, all_rows(logits.rows));
}

LossResult weighted_ce_loss(const Mat& logits, const std::vector<int>& labels,
                            const std::array<double, kNumClasses>& weights, double ratio,
                            Rng& rng) {
    return weighted_ce_loss(logits, labels, weights, downsample_rows(labels, ratio, rng));
}

std::vector<std::size_t> downsample_rows(const std::vector<int>& labels,
                                         const std::vector<std::size_t>& candidates, double ratio,
                                         Rng& rng) {
    if (!(ratio >= 0.0)) throw std::invalid_argument("downsample ratio must be >= 0");
    std::vector<std::size_t> closures;
    std::vector<std::size_t> opens;
    for (const std::size_t i : candidates)
        (labels[i] == static_cast<int>(Label::Open) ? opens : closures).push_back(i);

    const std::size_t want = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(closures.size())));
    std::vector<std::size_t> picked = sample_without_replacement(std::move(opens), want, rng);

    std::vector<std::size_t> out = std::move(closures);
    out.insert(out.end(), picked.begin(), picked.end());
    if (out.empty()) throw EmptyBatchAfterDownsampling();
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> downsample_rows(const std::vector<int>& labels, double ratio, Rng& rng) {
    return downsample_rows(labels, all_rows(labels.size()), ratio, rng);
}

std::vector<std::size_t> cap_open_rows(const std::vector<int>& labels, std::size_t cap,
                                       Rng& rng) {
    std::vector<std::size_t> closures;
    std::vector<std::size_t> opens;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == static_cast<int>(Label::Open) ? opens : closures).push_back(i);
    if (labels.size() <= cap) return all_rows(labels.size());

    const std::size_t open_keep = cap > closures.size() ? cap - closures.size() : 0;
    std::vector<std::size_t> picked = sample_without_replacement(std::move(opens), open_keep, rng);
    std::vector<std::size_t> out = std::move(closures);
    out.insert(out.end(), picked.begin(), picked.end());
    std::sort(out.begin(), out.end());
    return out;
}

SnapshotBatch select_rows(const SnapshotBatch& batch, const std::vector<std::size_t>& rows) {
    SnapshotBatch out;
    out.snapshot_ts = batch.snapshot_ts;
    out.static_x = Mat(rows.size(), batch.static_x.cols);
    out.time_scalars = Mat(rows.size(), batch.time_scalars.cols);
    out.edges.reserve(rows.size());
    out.edge_age_days.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        out.edges.push_back(batch.edges[i]);
        out.edge_age_days.push_back(batch.edge_age_days[i]);
        for (std::size_t c = 0; c < batch.static_x.cols; ++c)
            out.static_x.at(r, c) = batch.static_x.at(i, c);
        for (std::size_t c = 0; c < batch.time_scalars.cols; ++c)
            out.time_scalars.at(r, c) = batch.time_scalars.at(i, c);
    }
    return out;
}

// --- Adam ----------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(double lr, double weight_decay, int warmup_steps)
    : lr_(lr), weight_decay_(weight_decay), warmup_steps_(warmup_steps) {}

double AdamOptimizer::effective_lr() const {
    if (warmup_steps_ <= 0) return lr_;
    return lr_ * std::min(1.0, static_cast<double>(t_) / static_cast<double>(warmup_steps_));
}

void AdamOptimizer::update(std::vector<double>& p, const std::vector<double>& g, Moments& mom,
                           double lr_t, double bc1, double bc2) {
    if (mom.m.empty()) {
        mom.m.assign(p.size(), 0.0);
        mom.v.assign(p.size(), 0.0);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        mom.m[i] = kBeta1 * mom.m[i] + (1.0 - kBeta1) * g[i];
        mom.v[i] = kBeta2 * mom.v[i] + (1.0 - kBeta2) * g[i] * g[i];
        const double m_hat = mom.m[i] / bc1;
        const double v_hat = mom.v[i] / bc2;
        p[i] -= lr_t * (m_hat / (std::sqrt(v_hat) + kEps) + weight_decay_ * p[i]);
    }
}

void AdamOptimizer::step(MlpModel& model, const Gradients& g) {
    if (!initialized_) {
        w_.resize(model.w.size());
        b_.resize(model.b.size());
        initialized_ = true;
    }
    ++t_;
    const double lr_t = effective_lr();
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t l = 0; l < model.w.size(); ++l) {
        update(model.w[l].data, g.w[l].data, w_[l], lr_t, bc1, bc2);
        update(model.b[l], g.b[l], b_[l], lr_t, bc1, bc2);
    }
    if (!model.encoder.omega.empty()) {
        update(model.encoder.omega, g.omega, omega_, lr_t, bc1, bc2);
        update(model.encoder.phase, g.phase, phase_, lr_t, bc1, bc2);
    }
}

// --- training --------------------------------------------------------------------

TrainResult train(const TrainConfig& cfg, const EventLog& warm, const EventLog& timeline,
                  const SplitBoundaries& splits, const Scaler& scaler) {
    cfg.validate();
    if (cfg.features.groups.edge) {
        const auto expected = edge_numeric_names(cfg.features.include_chain_fields);
        if (scaler.size() != expected.size())
            throw SchemaMismatch("scaler width does not match the edge numeric block");
    }

    GraphState warm_state;
    warm_state.apply_events(warm);

    const std::vector<TimestampGroup> groups = group_by_timestamp(timeline);
    std::size_t n_train_groups = 0;
    while (n_train_groups < groups.size() && groups[n_train_groups].ts <= splits.train_end_ts)
        ++n_train_groups;
    if (n_train_groups == 0) throw NoTrainSnapshots();

    const ClosureIndex index = build_closure_index(timeline, warm);

    Rng root(cfg.seed);
    Rng init_rng = root.fork(0);
    MlpModel model = MlpModel::init(cfg.features, cfg.depth, cfg.hidden, init_rng);
    AdamOptimizer opt(cfg.lr, cfg.weight_decay, cfg.warmup_steps);

    TrainResult result;
    std::size_t open_rows_seen = 0;
    std::size_t open_rows_dropped = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng epoch_rng = root.fork(static_cast<uint64_t>(epoch));
        GraphState state = warm_state;
        double loss_sum = 0.0;
        int steps = 0;

        for (std::size_t gi = 0; gi < n_train_groups; ++gi) {
            const TimestampGroup& g = groups[gi];
            for (std::size_t e = g.begin; e < g.end; ++e) state.apply_event(timeline.events[e]);

            SnapshotBatch batch = assemble_snapshot(state, g.ts, scaler, cfg.features);
            if (batch.size() == 0) continue;

            std::vector<int> labels(batch.size());
            std::size_t n_open = 0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                labels[i] =
                    static_cast<int>(index.label_edge(batch.edges[i], g.ts, cfg.delta_seconds));
                if (labels[i] == static_cast<int>(Label::Open)) ++n_open;
            }
            open_rows_seen += n_open;

            std::vector<std::size_t> rows = all_rows(batch.size());
            if (cfg.max_open_edges_per_step) {
                rows = cap_open_rows(labels, *cfg.max_open_edges_per_step, epoch_rng);
                std::size_t open_kept = 0;
                for (const std::size_t i : rows)
                    if (labels[i] == static_cast<int>(Label::Open)) ++open_kept;
                open_rows_dropped += n_open - open_kept;
            }
            if (cfg.downsample_ratio) {
                try {
                    rows = downsample_rows(labels, rows, *cfg.downsample_ratio, epoch_rng);
                } catch (const EmptyBatchAfterDownsampling&) {
                    continue;
                }
            }
            if (rows.empty()) continue;

            SnapshotBatch sub = select_rows(batch, rows);
            std::vector<int> sub_labels(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) sub_labels[r] = labels[rows[r]];

            ForwardCache cache;
            const Mat logits = forward_batch(model, sub, &cache);
            const LossResult loss = weighted_ce_loss(logits, sub_labels, cfg.class_weights);
            if (!std::isfinite(loss.loss))
                throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) +
                                    ", snapshot " + std::to_string(g.ts));
            const Gradients grads = backward(model, cache, loss.dlogits, &sub.time_scalars);
            opt.step(model, grads);
            loss_sum += loss.loss;
            ++steps;
        }

        // Validation pass: keep replaying the same state into the val window.
        std::vector<PredictionInstance> val_instances;
        for (std::size_t gi = n_train_groups; gi < groups.size(); ++gi) {
            const TimestampGroup& g = groups[gi];
            if (g.ts > splits.val_end_ts) break;
            for (std::size_t e = g.begin; e < g.end; ++e) state.apply_event(timeline.events[e]);
            SnapshotBatch batch = assemble_snapshot(state, g.ts, scaler, cfg.features);
            if (batch.size() == 0) continue;
            const Mat logits = forward_batch(model, batch);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const double* z = logits.row(i);
                int pred = 0;
                for (int j = 1; j < kNumClasses; ++j)
                    if (z[j] > z[pred]) pred = j;
                PredictionInstance inst;
                inst.snapshot_ts = g.ts;
                inst.edge = batch.edges[i];
                inst.predicted = static_cast<Label>(pred);
                inst.truth = index.label_edge(batch.edges[i], g.ts, cfg.delta_seconds);
                inst.edge_age_days = batch.edge_age_days[i];
                val_instances.push_back(std::move(inst));
            }
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = steps > 0 ? loss_sum / steps : 0.0;
        log.lr_last = opt.effective_lr();
        log.steps = steps;
        if (!val_instances.empty()) {
            const MetricsReport report = f1_report(val_instances);
            log.val_macro_f1 = report.macro_f1;
            for (std::size_t c = 0; c < kNumClasses; ++c) log.val_f1[c] = report.per_class[c].f1;
        }
        result.log.push_back(log);
        result.total_steps += static_cast<std::size_t>(steps);

        if (log.val_macro_f1 > result.best_val_macro_f1) {
            result.best_val_macro_f1 = log.val_macro_f1;
            result.best_epoch = epoch;
            result.model = model;
        }
    }

    // Degenerate runs with no val snapshots fall back to the final weights.
    if (result.best_epoch < 0) {
        result.best_epoch = cfg.epochs;
        result.model = std::move(model);
    }
    if (open_rows_seen > 0)
        result.capped_open_fraction =
            static_cast<double>(open_rows_dropped) / static_cast<double>(open_rows_seen);
    return result;
}

// --- baselines ----------------------------------------------------------------

const char* to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::Uniform: return "uniform";
        case BaselineKind::Stratified: return "stratified";
        case BaselineKind::Majority: return "majority";
    }
    return "uniform";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
    if (s == "uniform") return BaselineKind::Uniform;
    if (s == "stratified") return BaselineKind::Stratified;
    if (s == "majority") return BaselineKind::Majority;
    throw std::invalid_argument("bad baseline kind (expected uniform, stratified, majority): " + s);
}

std::vector<Label> predict_baseline(BaselineKind kind,
                                    const std::array<double, kNumClasses>& train_dist,
                                    std::size_t n, Rng& rng) {
    std::vector<Label> out(n, Label::Open);
    switch (kind) {
        case BaselineKind::Majority:
            break;
        case BaselineKind::Uniform:
            for (auto& l : out) l = static_cast<Label>(rng.uniform_int(kNumClasses));
            break;
        case BaselineKind::Stratified: {
            double total = 0.0;
            for (const double p : train_dist) {
                if (p < 0.0) throw std::invalid_argument("negative class probability");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-6)
                throw std::invalid_argument("stratified distribution must sum to 1");
            for (auto& l : out) {
                const double u = rng.uniform();
                double acc = 0.0;
                int pick = kNumClasses - 1;
                for (int c = 0; c < kNumClasses; ++c) {
                    acc += train_dist[static_cast<std::size_t>(c)];
                    if (u < acc) {
                        pick = c;
                        break;
                    }
                }
                l = static_cast<Label>(pick);
            }
            break;
        }
    }
    return out;
}

// --- attribution ----------------------------------------------------------------

std::vector<std::pair<std::string, double>> AttributionReport::ranked() const {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) out.emplace_back(names[i], mean_abs[i]);
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

nlohmann::json AttributionReport::to_json() const {
    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& [name, value] : ranked())
        ranking.push_back({{"feature", name}, {"mean_abs_attribution", value}});
    return nlohmann::json{{"ranking", std::move(ranking)},
                          {"max_completeness_gap", max_completeness_gap}};
}

AttributionReport attribute(const MlpModel& model, const Mat& x, int steps) {
    if (steps < 1) throw std::invalid_argument("attribution needs at least 1 step");
    const std::size_t n = x.rows;
    const std::size_t dim = model.input_dim();
    if (x.cols != dim) throw ShapeMismatch("attribution input width mismatch");

    const Mat logits_x = forward(model, x);
    std::vector<int> pred(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = logits_x.row(i);
        for (int j = 1; j < kNumClasses; ++j)
            if (z[j] > z[pred[i]]) pred[i] = j;
    }
    const Mat logits_0 = forward(model, Mat(1, dim));

    Mat avg_grad(n, dim);
    for (int k = 1; k <= steps; ++k) {
        const double alpha = (static_cast<double>(k) - 0.5) / static_cast<double>(steps);
        Mat xk(n, dim);
        for (std::size_t i = 0; i < x.data.size(); ++i) xk.data[i] = alpha * x.data[i];
        ForwardCache cache;
        forward(model, xk, &cache);
        Mat dlogits(n, kNumClasses);
        for (std::size_t i = 0; i < n; ++i)
            dlogits.at(i, static_cast<std::size_t>(pred[i])) = 1.0;
        const Mat grad = input_gradient(model, cache, dlogits);
        for (std::size_t i = 0; i < avg_grad.data.size(); ++i)
            avg_grad.data[i] += grad.data[i] / static_cast<double>(steps);
    }

    Mat attr(n, dim);
    for (std::size_t i = 0; i < attr.data.size(); ++i)
        attr.data[i] = x.data[i] * avg_grad.data[i];

    AttributionReport report;
    const FeatureSchema& schema = model.schema;
    for (std::size_t f = 0; f < schema.static_dim(); ++f) report.names.push_back(schema.names[f]);
    const bool has_time = schema.time_width > 0;
    if (has_time)
        for (const char* s : {"edge_age", "src_recency", "dst_recency"})
            report.names.push_back(s);
    report.mean_abs.assign(report.names.size(), 0.0);

    const std::size_t d = static_cast<std::size_t>(schema.d_time);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < schema.static_dim(); ++f)
            report.mean_abs[f] += std::abs(attr.at(i, f));
        if (has_time) {
            for (std::size_t s = 0; s < 3; ++s) {
                double block = 0.0;
                for (std::size_t k = 0; k < d; ++k)
                    block += attr.at(i, schema.time_offset + s * d + k);
                report.mean_abs[schema.static_dim() + s] += std::abs(block);
            }
        }
        double total = 0.0;
        for (std::size_t f = 0; f < dim; ++f) total += attr.at(i, f);
        const double target = logits_x.at(i, static_cast<std::size_t>(pred[i])) -
                              logits_0.at(0, static_cast<std::size_t>(pred[i]));
        const double gap = std::abs(total - target) / std::max(1e-6, std::abs(target));
        report.max_completeness_gap = std::max(report.max_completeness_gap, gap);
    }
    for (double& v : report.mean_abs) v /= static_cast<double>(n);
    return report;
}

// --- checkpoints -------------------------------------------------------------------

nlohmann::json checkpoint_json(const MlpModel& model, const TrainConfig& cfg) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < model.w.size(); ++l) {
        layers.push_back({{"rows", model.w[l].rows},
                          {"cols", model.w[l].cols},
                          {"weights", doubles_to_b64(model.w[l].data)},
                          {"bias", doubles_to_b64(model.b[l])}});
    }
    return nlohmann::json{{"format_version", 1},
                          {"schema", model.schema.to_json()},
                          {"depth", model.depth},
                          {"hidden", model.hidden},
                          {"layers", std::move(layers)},
                          {"encoder",
                           {{"omega", doubles_to_b64(model.encoder.omega)},
                            {"phase", doubles_to_b64(model.encoder.phase)}}},
                          {"train_config", cfg.to_json()}};
}

MlpModel load_checkpoint(const nlohmann::json& j, TrainConfig* cfg_out) {
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("unsupported checkpoint version");
    MlpModel m;
    m.schema = FeatureSchema::from_json(j.at("schema"));
    m.depth = j.at("depth").get<int>();
    m.hidden = j.at("hidden").get<int>();
    for (const auto& layer : j.at("layers")) {
        Mat w(layer.at("rows").get<std::size_t>(), layer.at("cols").get<std::size_t>());
        w.data = b64_to_doubles(layer.at("weights").get<std::string>());
        if (w.data.size() != w.rows * w.cols)
            throw std::runtime_error("checkpoint weight blob size mismatch");
        std::vector<double> bias = b64_to_doubles(layer.at("bias").get<std::string>());
        if (bias.size() != w.rows) throw std::runtime_error("checkpoint bias size mismatch");
        m.w.push_back(std::move(w));
        m.b.push_back(std::move(bias));
    }
    if (m.w.empty() || m.w.front().cols != m.schema.dim() ||
        m.w.back().rows != kNumClasses)
        throw std::runtime_error("checkpoint layer shapes do not chain to the schema");
    for (std::size_t l = 0; l + 1 < m.w.size(); ++l)
        if (m.w[l + 1].cols != m.w[l].rows)
            throw std::runtime_error("checkpoint layer shapes do not chain");
    m.encoder.omega = b64_to_doubles(j.at("encoder").at("omega").get<std::string>());
    m.encoder.phase = b64_to_doubles(j.at("encoder").at("phase").get<std::string>());
    if (m.encoder.omega.size() != static_cast<std::size_t>(m.schema.d_time) ||
        m.encoder.phase.size() != m.encoder.omega.size())
        throw std::runtime_error("checkpoint encoder size mismatch");
    if (cfg_out) *cfg_out = TrainConfig::from_json(j.at("train_config"));
    return m;
}

}  // namespace lncb
