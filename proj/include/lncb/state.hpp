#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"
#include "lncb/event.hpp"

namespace lncb {

// Directed edge identity: (src, dst). One channel contributes two directed
// edges, each carrying its own policy snapshot.
using EdgeKey = std::pair<std::string, std::string>;

struct NodeStats {
    int64_t count_open = 0;
    int64_t count_mutual = 0;
    int64_t count_forced = 0;
    int64_t last_seen_ts = 0;

    bool operator==(const NodeStats&) const = default;
};

struct OpenEdgeRecord {
    int64_t open_gossip_ts = 0;
    GossipEvent opening_event;

    bool operator==(const OpenEdgeRecord&) const = default;
};

struct StateDiagnostics {
    std::size_t reopened_edges = 0;
    std::size_t close_of_unknown_edge = 0;
};

class OutOfOrderEvent : public std::runtime_error {
public:
    OutOfOrderEvent(int64_t event_ts, int64_t state_ts)
        : std::runtime_error("event at " + std::to_string(event_ts) +
                             " precedes state time " + std::to_string(state_ts)) {}
};

class UnknownNode : public std::runtime_error {
public:
    explicit UnknownNode(const std::string& node)
        : std::runtime_error("node never observed: " + node) {}
};

// Replayed network state at a point in gossip time. Tracks the set of open
// directed edges (most recent event per edge wins, so a reopen after a close
// makes the edge open again) plus per-node lifetime counters.
class GraphState {
public:
    // Seconds of recency reported for nodes that have never been seen.
    static constexpr int64_t kRecencySentinel = 180LL * 86400;

    void apply_event(const GossipEvent& e);

    // Applies every event in order. Events must be sorted by gossip_ts.
    void apply_events(const EventLog& log);

    const std::map<EdgeKey, OpenEdgeRecord>& open_edges() const { return edges_; }
    const std::map<std::string, NodeStats>& node_stats() const { return nodes_; }
    const StateDiagnostics& diagnostics() const { return diag_; }
    int64_t current_ts() const { return current_ts_; }

    // Seconds since the node last appeared in any event, capped at the
    // sentinel. With cap_unknown=false an unseen node throws instead.
    int64_t recency(const std::string& node, int64_t t, bool cap_unknown = true) const;

    // Seconds since the edge (re)opened.
    int64_t edge_age(const EdgeKey& key, int64_t t) const;

    nlohmann::json to_json() const;
    static GraphState from_json(const nlohmann::json& j);

    bool operator==(const GraphState& other) const {
        return edges_ == other.edges_ && nodes_ == other.nodes_ &&
               current_ts_ == other.current_ts_;
    }

private:
    std::map<EdgeKey, OpenEdgeRecord> edges_;
    std::map<std::string, NodeStats> nodes_;
    StateDiagnostics diag_;
    int64_t current_ts_ = 0;
    bool started_ = false;
};

}  // namespace lncb
