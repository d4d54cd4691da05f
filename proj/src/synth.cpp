#include "lncb/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "lncb/rng.hpp"

namespace lncb {

void SynthParams::validate() const {
    if (n_nodes < 2) throw InvalidParams("n_nodes must be >= 2");
    if (!(span_days > 0.0)) throw InvalidParams("span_days must be > 0");
    if (!(snapshots_per_day > 0.0)) throw InvalidParams("snapshots_per_day must be > 0");
    if (open_rate < 0.0) throw InvalidParams("open_rate must be >= 0");
    const int64_t max_pairs =
        static_cast<int64_t>(n_nodes) * (n_nodes - 1) / 2;
    if (warm_channels < 0 || warm_channels > max_pairs)
        throw InvalidParams("warm_channels must fit the number of node pairs");
    if (h0 < 0.0) throw InvalidParams("h0 must be >= 0");
    if (mix_slope < 0.0) throw InvalidParams("mix_slope must be >= 0");
    for (const double p : {forced_mix, penalty_rate, missing_rate})
        if (p < 0.0 || p > 1.0) throw InvalidParams("mix/rate parameters must be in [0, 1]");
}

std::string synth_node_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "n%06d", index);
    return buf;
}

namespace {

struct OpenChannel {
    std::string channel_id;
    int a = 0, b = 0;  // node indices, a < b
    int64_t capacity = 0;
};

Implementation sample_implementation(Rng& rng) {
    const double u = rng.uniform();
    if (u < 0.55) return Implementation::Lnd;
    if (u < 0.75) return Implementation::Cln;
    if (u < 0.85) return Implementation::Eclair;
    if (u < 0.90) return Implementation::Ldk;
    return Implementation::Other;
}

PolicySnapshot sample_policy(Rng& rng, int64_t capacity, int64_t ts, double missing_rate) {
    PolicySnapshot p;
    p.fee_base_msat = static_cast<int64_t>(rng.uniform_int(5001));
    p.fee_rate_milli_msat = static_cast<int64_t>(rng.uniform_int(10001));
    p.min_htlc = 1 + static_cast<int64_t>(rng.uniform_int(10000));
    p.max_htlc_msat = static_cast<int64_t>(std::llround(static_cast<double>(capacity) * 1000.0 * 0.99));
    const int64_t tlds[3] = {40, 80, 144};
    p.time_lock_delta = tlds[rng.uniform_int(3)];
    p.disabled = rng.bernoulli(0.02);
    p.last_update = ts;
    p.implementation = sample_implementation(rng);

    // Knock out optional fields independently; draw order is fixed so the
    // stream stays reproducible.
    if (rng.bernoulli(missing_rate)) p.fee_base_msat.reset();
    if (rng.bernoulli(missing_rate)) p.fee_rate_milli_msat.reset();
    if (rng.bernoulli(missing_rate)) p.min_htlc.reset();
    if (rng.bernoulli(missing_rate)) p.max_htlc_msat.reset();
    if (rng.bernoulli(missing_rate)) p.time_lock_delta.reset();
    if (rng.bernoulli(missing_rate)) p.disabled.reset();
    if (rng.bernoulli(missing_rate)) p.last_update.reset();
    return p;
}

struct Emitter {
    EventLog& log;
    Rng& rng;
    double missing_rate;

    void pair(const std::string& channel_id, const std::string& na, const std::string& nb,
              int64_t capacity, int64_t ts, int64_t height, double block_fee,
              ChannelStatus status, EventLabel label) {
        GossipEvent e;
        e.gossip_ts = ts;
        e.chain_ts = ts - 1800;
        e.height = height;
        e.channel_id = channel_id;
        e.capacity = capacity;
        e.block_avg_fee_rate = block_fee;
        e.channel_status = status;
        e.event_label = label;

        e.src = na;
        e.dst = nb;
        e.src_policy = sample_policy(rng, capacity, ts, missing_rate);
        e.dst_policy = sample_policy(rng, capacity, ts, missing_rate);
        log.events.push_back(e);

        std::swap(e.src, e.dst);
        std::swap(e.src_policy, e.dst_policy);
        log.events.push_back(std::move(e));
    }
};

}  // namespace

SynthResult generate(const SynthParams& params) {
    params.validate();
    Rng rng(params.seed);

    SynthResult result;
    result.log.meta.source = "synth";
    result.reliability.resize(static_cast<std::size_t>(params.n_nodes));
    for (double& r : result.reliability) r = rng.uniform();

    Emitter emit{result.log, rng, params.missing_rate};
    std::vector<OpenChannel> open;
    std::unordered_set<int64_t> used_pairs;
    int64_t channel_counter = 0;

    const auto pair_key = [&](int a, int b) {
        return static_cast<int64_t>(a) * params.n_nodes + b;
    };
    const auto sample_pair = [&](int& a, int& b) -> bool {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const int i = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(params.n_nodes)));
            int j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(params.n_nodes - 1)));
            if (j >= i) ++j;
            a = std::min(i, j);
            b = std::max(i, j);
            if (used_pairs.insert(pair_key(a, b)).second) return true;
        }
        return false;
    };
    const auto sample_capacity = [&]() {
        const double v = std::exp(rng.normal() * 1.0 + 13.5);
        return std::max<int64_t>(20000, std::llround(v));
    };
    const auto open_channel = [&](int64_t ts, int64_t height) {
        int a = 0, b = 0;
        if (!sample_pair(a, b)) return;
        OpenChannel ch;
        char tx[24];
        std::snprintf(tx, sizeof(tx), "tx%08lld", static_cast<long long>(channel_counter++));
        ch.channel_id = std::string(tx) + ":0";
        ch.a = a;
        ch.b = b;
        ch.capacity = sample_capacity();
        emit.pair(ch.channel_id, synth_node_name(a), synth_node_name(b), ch.capacity, ts, height,
                  rng.uniform(1.0, 60.0), ChannelStatus::Opening, EventLabel::Open);
        open.push_back(std::move(ch));
    };

    // Warm snapshot: the full network as first observed.
    for (int c = 0; c < params.warm_channels; ++c) open_channel(params.t0, 740000);

    const int n_snapshots =
        static_cast<int>(std::llround(params.span_days * params.snapshots_per_day));
    for (int k = 1; k <= n_snapshots; ++k) {
        const int64_t ts =
            params.t0 + static_cast<int64_t>(std::llround(k * 86400.0 / params.snapshots_per_day));
        const int64_t height = 740000 + static_cast<int64_t>(std::llround(k * 144.0 / params.snapshots_per_day));

        // Closures: unreliable endpoints raise the per-channel hazard.
        std::vector<OpenChannel> survivors;
        survivors.reserve(open.size());
        for (OpenChannel& ch : open) {
            const double rel = std::min(result.reliability[static_cast<std::size_t>(ch.a)],
                                        result.reliability[static_cast<std::size_t>(ch.b)]);
            const double p_close = std::min(1.0, params.h0 * (1.0 - rel) / params.snapshots_per_day);
            if (!rng.bernoulli(p_close)) {
                survivors.push_back(std::move(ch));
                continue;
            }
            // With a nonzero slope, the least reliable pairs skew toward
            // forced closures and moderately reliable ones toward mutual
            // closures, so the closure type becomes predictable from node
            // history instead of a pure coin flip.
            const double p_forced = std::clamp(
                params.forced_mix + params.mix_slope * (0.5 - rel), 0.0, 1.0);
            const bool forced = rng.bernoulli(p_forced);
            EventLabel gossip_label = forced ? EventLabel::Forced : EventLabel::Mutual;
            if (forced && rng.bernoulli(params.penalty_rate)) gossip_label = EventLabel::Penalty;
            emit.pair(ch.channel_id, synth_node_name(ch.a), synth_node_name(ch.b), ch.capacity,
                      ts, height, rng.uniform(1.0, 60.0), ChannelStatus::Closing, gossip_label);
            result.schedule.push_back({ch.channel_id, synth_node_name(ch.a),
                                       synth_node_name(ch.b), ts,
                                       forced ? Label::Forced : Label::Mutual});
        }
        open = std::move(survivors);

        const int n_new = rng.poisson(params.open_rate);
        for (int c = 0; c < n_new; ++c) open_channel(ts, height);
    }

    return result;
}

void write_schedule_csv(const std::vector<ScheduledClosure>& schedule, std::ostream& out) {
    out << "channel_id,src,dst,close_ts,label\n";
    for (const auto& closure : schedule)
        out << closure.channel_id << ',' << closure.src << ',' << closure.dst << ','
            << closure.close_ts << ',' << to_string(closure.label) << '\n';
}

}  // namespace lncb
