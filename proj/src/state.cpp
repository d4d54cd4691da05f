#include "lncb/state.hpp"

#include <algorithm>

#include "lncb/ingest.hpp"

namespace lncb {

void GraphState::apply_event(const GossipEvent& e) {
    if (started_ && e.gossip_ts < current_ts_) throw OutOfOrderEvent(e.gossip_ts, current_ts_);
    current_ts_ = e.gossip_ts;
    started_ = true;

    const EdgeKey key{e.src, e.dst};
    NodeStats& src = nodes_[e.src];
    NodeStats& dst = nodes_[e.dst];
    src.last_seen_ts = e.gossip_ts;
    dst.last_seen_ts = e.gossip_ts;

    if (e.channel_status == ChannelStatus::Opening) {
        auto [it, inserted] = edges_.insert_or_assign(key, OpenEdgeRecord{e.gossip_ts, e});
        (void)it;
        if (!inserted) ++diag_.reopened_edges;
        ++src.count_open;
        ++dst.count_open;
        return;
    }

    if (edges_.erase(key) == 0) ++diag_.close_of_unknown_edge;
    // Penalty closures are breach remedies, counted with the forced class.
    if (e.event_label == EventLabel::Mutual) {
        ++src.count_mutual;
        ++dst.count_mutual;
    } else {
        ++src.count_forced;
        ++dst.count_forced;
    }
}

void GraphState::apply_events(const EventLog& log) {
    for (const auto& e : log.events) apply_event(e);
}

int64_t GraphState::recency(const std::string& node, int64_t t, bool cap_unknown) const {
    auto it = nodes_.find(node);
    if (it == nodes_.end()) {
        if (cap_unknown) return kRecencySentinel;
        throw UnknownNode(node);
    }
    return std::min(t - it->second.last_seen_ts, kRecencySentinel);
}

int64_t GraphState::edge_age(const EdgeKey& key, int64_t t) const {
    auto it = edges_.find(key);
    if (it == edges_.end()) throw std::out_of_range("edge not open: " + key.first + "->" + key.second);
    return t - it->second.open_gossip_ts;
}

nlohmann::json GraphState::to_json() const {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [key, rec] : edges_) {
        edges.push_back({{"src", key.first},
                         {"dst", key.second},
                         {"open_gossip_ts", rec.open_gossip_ts},
                         {"opening_event", event_to_json(rec.opening_event)}});
    }
    nlohmann::json nodes = nlohmann::json::object();
    for (const auto& [id, st] : nodes_) {
        nodes[id] = {{"count_open", st.count_open},
                     {"count_mutual", st.count_mutual},
                     {"count_forced", st.count_forced},
                     {"last_seen_ts", st.last_seen_ts}};
    }
    return nlohmann::json{{"format_version", 1},
                          {"current_ts", current_ts_},
                          {"started", started_},
                          {"edges", std::move(edges)},
                          {"nodes", std::move(nodes)}};
}

GraphState GraphState::from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("unsupported state checkpoint version");
    GraphState s;
    s.current_ts_ = j.at("current_ts").get<int64_t>();
    s.started_ = j.at("started").get<bool>();
    for (const auto& e : j.at("edges")) {
        EdgeKey key{e.at("src").get<std::string>(), e.at("dst").get<std::string>()};
        OpenEdgeRecord rec;
        rec.open_gossip_ts = e.at("open_gossip_ts").get<int64_t>();
        rec.opening_event = event_from_json(e.at("opening_event"));
        s.edges_.emplace(std::move(key), std::move(rec));
    }
    for (const auto& [id, st] : j.at("nodes").items()) {
        NodeStats ns;
        ns.count_open = st.at("count_open").get<int64_t>();
        ns.count_mutual = st.at("count_mutual").get<int64_t>();
        ns.count_forced = st.at("count_forced").get<int64_t>();
        ns.last_seen_ts = st.at("last_seen_ts").get<int64_t>();
        s.nodes_.emplace(id, ns);
    }
    return s;
}

}  // namespace lncb
