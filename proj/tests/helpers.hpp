// Builders and brute-force oracles shared by the test binaries.
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lncb/event.hpp"
#include "lncb/rng.hpp"
#include "lncb/state.hpp"

namespace testutil {

inline lncb::PolicySnapshot make_policy(int64_t base = 1000, int64_t rate = 100) {
    lncb::PolicySnapshot p;
    p.fee_base_msat = base;
    p.fee_rate_milli_msat = rate;
    p.min_htlc = 1000;
    p.max_htlc_msat = 990000000;
    p.time_lock_delta = 40;
    p.disabled = false;
    p.last_update = 1700000000;
    p.implementation = lncb::Implementation::Lnd;
    return p;
}

inline lncb::GossipEvent make_event(int64_t ts, const std::string& channel_id,
                                    const std::string& src, const std::string& dst,
                                    lncb::ChannelStatus status,
                                    lncb::EventLabel label = lncb::EventLabel::Open,
                                    int64_t capacity = 500000) {
    lncb::GossipEvent e;
    e.gossip_ts = ts;
    e.chain_ts = ts - 3600;
    e.height = 800000 + ts / 600;
    e.channel_id = channel_id;
    e.src = src;
    e.dst = dst;
    e.capacity = capacity;
    e.block_avg_fee_rate = 12.5;
    e.channel_status = status;
    e.event_label = label;
    e.src_policy = make_policy(1000, 100);
    e.dst_policy = make_policy(2000, 200);
    return e;
}

inline lncb::GossipEvent make_open(int64_t ts, const std::string& channel_id,
                                   const std::string& src, const std::string& dst,
                                   int64_t capacity = 500000) {
    return make_event(ts, channel_id, src, dst, lncb::ChannelStatus::Opening,
                      lncb::EventLabel::Open, capacity);
}

inline lncb::GossipEvent make_close(int64_t ts, const std::string& channel_id,
                                    const std::string& src, const std::string& dst,
                                    lncb::EventLabel label = lncb::EventLabel::Mutual) {
    return make_event(ts, channel_id, src, dst, lncb::ChannelStatus::Closing, label);
}

// Random but schema-valid stream with heavy edge reuse, so reopen and
// close-of-unknown paths get exercised. Timestamps are non-decreasing.
inline lncb::EventLog random_stream(lncb::Rng& rng, std::size_t n_events, int n_nodes = 50) {
    lncb::EventLog log;
    log.events.reserve(n_events);
    int64_t ts = 1700000000;
    for (std::size_t i = 0; i < n_events; ++i) {
        if (rng.bernoulli(0.3)) ts += 1 + static_cast<int64_t>(rng.uniform_int(3600));
        const int a = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_nodes)));
        int b = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_nodes - 1)));
        if (b >= a) ++b;
        const std::string src = "n" + std::to_string(a);
        const std::string dst = "n" + std::to_string(b);
        const std::string channel =
            "ch" + std::to_string(std::min(a, b)) + "_" + std::to_string(std::max(a, b)) + ":0";
        if (rng.bernoulli(0.5)) {
            log.events.push_back(make_open(ts, channel, src, dst));
        } else {
            const double pick = rng.uniform();
            const lncb::EventLabel label = pick < 0.5   ? lncb::EventLabel::Mutual
                                           : pick < 0.9 ? lncb::EventLabel::Forced
                                                        : lncb::EventLabel::Penalty;
            log.events.push_back(make_close(ts, channel, src, dst, label));
        }
    }
    return log;
}

// Brute-force open-edge recomputation: an edge is open iff the latest event
// touching it is an opening.
inline std::map<lncb::EdgeKey, const lncb::GossipEvent*> brute_force_open_edges(
    const std::vector<lncb::GossipEvent>& events, std::size_t count) {
    std::map<lncb::EdgeKey, const lncb::GossipEvent*> last;
    for (std::size_t i = 0; i < count; ++i) {
        const lncb::GossipEvent& e = events[i];
        last[{e.src, e.dst}] = &e;
    }
    std::map<lncb::EdgeKey, const lncb::GossipEvent*> open;
    for (const auto& [key, e] : last)
        if (e->channel_status == lncb::ChannelStatus::Opening) open.emplace(key, e);
    return open;
}

}  // namespace testutil
