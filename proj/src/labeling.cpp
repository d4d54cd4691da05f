#include "lncb/labeling.hpp"

#include <algorithm>
#include <cmath>

namespace lncb {

const char* to_string(Label l) {
    switch (l) {
        case Label::Open: return "open";
        case Label::Forced: return "forced";
        case Label::Mutual: return "mutual";
    }
    return "open";
}

const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

void ClosureIndex::add(const EdgeKey& edge, int64_t close_ts, Label label) {
    index_[edge].push_back({close_ts, label});
}

void ClosureIndex::finalize() {
    for (auto& [edge, list] : index_)
        std::sort(list.begin(), list.end(),
                  [](const Closure& a, const Closure& b) { return a.close_ts < b.close_ts; });
}

Label ClosureIndex::label_edge(const EdgeKey& edge, int64_t t, int64_t delta) const {
    auto it = index_.find(edge);
    if (it == index_.end()) return Label::Open;
    const auto& list = it->second;
    auto first = std::upper_bound(list.begin(), list.end(), t,
                                  [](int64_t v, const Closure& c) { return v < c.close_ts; });
    if (first == list.end() || first->close_ts > t + delta) return Label::Open;
    return first->label;
}

const std::vector<ClosureIndex::Closure>* ClosureIndex::closures(const EdgeKey& edge) const {
    auto it = index_.find(edge);
    return it == index_.end() ? nullptr : &it->second;
}

ClosureIndex build_closure_index(const EventLog& timeline, const EventLog& warm) {
    ClosureIndex index;
    for (const EventLog* log : {&warm, &timeline}) {
        for (const auto& e : log->events) {
            if (e.channel_status != ChannelStatus::Closing) continue;
            const Label l = e.event_label == EventLabel::Mutual ? Label::Mutual : Label::Forced;
            index.add({e.src, e.dst}, e.gossip_ts, l);
        }
    }
    index.finalize();
    return index;
}

SplitBoundaries chronological_split(const EventLog& timeline, double train_frac,
                                    double val_frac) {
    if (timeline.empty()) throw DegenerateTimeline();
    const int64_t t_min = timeline.events.front().gossip_ts;
    const int64_t t_max = timeline.events.back().gossip_ts;
    if (t_min >= t_max) throw DegenerateTimeline();
    const double span = static_cast<double>(t_max - t_min);
    SplitBoundaries b;
    b.train_end_ts = t_min + std::llround(train_frac * span);
    b.val_end_ts = t_min + std::llround((train_frac + val_frac) * span);
    b.data_end_ts = t_max;
    return b;
}

Split split_of(const SplitBoundaries& b, int64_t ts) {
    if (ts <= b.train_end_ts) return Split::Train;
    if (ts <= b.val_end_ts) return Split::Val;
    return Split::Test;
}

std::map<EdgeKey, Label> label_snapshot(const GraphState& state, const ClosureIndex& index,
                                        int64_t delta) {
    std::map<EdgeKey, Label> out;
    const int64_t t = state.current_ts();
    for (const auto& [edge, rec] : state.open_edges())
        out.emplace(edge, index.label_edge(edge, t, delta));
    return out;
}

LifetimeStats closure_lifetime_stats(const EventLog& warm, const EventLog& timeline,
                                     int64_t horizon_seconds) {
    // Walk one direction per channel (twins carry the same timing) and pair
    // each closing event with the most recent opening of the same channel_id.
    std::map<std::string, int64_t> last_open;
    std::vector<int64_t> lifetimes;
    for (const EventLog* log : {&warm, &timeline}) {
        for (const auto& e : log->events) {
            if (e.src >= e.dst) continue;
            if (e.channel_status == ChannelStatus::Opening) {
                last_open[e.channel_id] = e.gossip_ts;
            } else if (auto it = last_open.find(e.channel_id); it != last_open.end()) {
                lifetimes.push_back(e.gossip_ts - it->second);
                last_open.erase(it);
            }
        }
    }

    LifetimeStats stats;
    stats.closed_channels = lifetimes.size();
    if (lifetimes.empty()) return stats;

    std::sort(lifetimes.begin(), lifetimes.end());
    const std::size_t n = lifetimes.size();
    const double median_seconds =
        n % 2 == 1 ? static_cast<double>(lifetimes[n / 2])
                   : 0.5 * (static_cast<double>(lifetimes[n / 2 - 1]) +
                            static_cast<double>(lifetimes[n / 2]));
    stats.median_lifetime_days = median_seconds / 86400.0;
    const auto within = std::upper_bound(lifetimes.begin(), lifetimes.end(), horizon_seconds);
    stats.fraction_closed_within =
        static_cast<double>(within - lifetimes.begin()) / static_cast<double>(n);
    return stats;
}

}  // namespace lncb
