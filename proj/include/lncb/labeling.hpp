#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lncb/event.hpp"
#include "lncb/state.hpp"

namespace lncb {

// Prediction classes. Index order is load-bearing: it matches the loss-weight
// vector [w_open, w_forced, w_mutual] and every confusion-matrix axis.
enum class Label : int { Open = 0, Forced = 1, Mutual = 2 };
inline constexpr int kNumClasses = 3;

const char* to_string(Label l);

// Per directed edge, every closure observed in the data, sorted by time.
// Penalty closures are stored as Forced.
class ClosureIndex {
public:
    struct Closure {
        int64_t close_ts;
        Label label;
        bool operator==(const Closure&) const = default;
    };

    void add(const EdgeKey& edge, int64_t close_ts, Label label);
    void finalize();  // sorts per-edge lists; call once after the last add

    // Label of the earliest closure with close_ts in (t, t + delta], Open if
    // there is none.
    Label label_edge(const EdgeKey& edge, int64_t t, int64_t delta) const;

    const std::vector<Closure>* closures(const EdgeKey& edge) const;
    const std::map<EdgeKey, std::vector<Closure>>& all() const { return index_; }
    std::size_t edge_count() const { return index_.size(); }

private:
    std::map<EdgeKey, std::vector<Closure>> index_;
};

ClosureIndex build_closure_index(const EventLog& timeline, const EventLog& warm);

struct SplitBoundaries {
    int64_t train_end_ts = 0;
    int64_t val_end_ts = 0;
    int64_t data_end_ts = 0;
};

enum class Split : int { Train = 0, Val = 1, Test = 2 };

const char* to_string(Split s);

class DegenerateTimeline : public std::runtime_error {
public:
    DegenerateTimeline() : std::runtime_error("timeline has zero time span") {}
};

// Boundaries on the time axis: train gets the first 70% of the span, val the
// next 15%, test the rest. Events belong to a split by gossip_ts <= boundary.
SplitBoundaries chronological_split(const EventLog& timeline, double train_frac = 0.70,
                                    double val_frac = 0.15);

Split split_of(const SplitBoundaries& b, int64_t ts);

// Labels every open edge of the replayed state.
std::map<EdgeKey, Label> label_snapshot(const GraphState& state, const ClosureIndex& index,
                                        int64_t delta);

struct LifetimeStats {
    std::size_t closed_channels = 0;
    double median_lifetime_days = 0.0;
    double fraction_closed_within = 0.0;  // share with lifetime <= horizon
};

// Lifetime of channels that eventually close: close_ts minus the most recent
// opening before it, canonical direction only (twins mirror each other).
LifetimeStats closure_lifetime_stats(const EventLog& warm, const EventLog& timeline,
                                     int64_t horizon_seconds = 180LL * 86400);

}  // namespace lncb
