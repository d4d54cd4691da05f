#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lncb {

enum class ChannelStatus { Opening, Closing };

// Closure type carried by the raw event. `Penalty` survives ingestion as-is
// and is merged into the forced class by the labeling module.
enum class EventLabel { Open, Mutual, Forced, Penalty };

enum class Implementation { Lnd, Cln, Eclair, Ldk, Other };

// Per-direction routing policy as declared in gossip. Fields may be absent
// in the source data; absence is preserved (never silently zero).
struct PolicySnapshot {
    std::optional<int64_t> fee_base_msat;
    std::optional<int64_t> fee_rate_milli_msat;  // parts-per-million
    std::optional<int64_t> min_htlc;             // msat
    std::optional<int64_t> max_htlc_msat;
    std::optional<int64_t> time_lock_delta;      // blocks
    std::optional<bool> disabled;
    std::optional<int64_t> last_update;          // unix seconds
    Implementation implementation = Implementation::Other;

    bool operator==(const PolicySnapshot&) const = default;
};

// One directed channel opening/closure observed via gossip.
struct GossipEvent {
    int64_t gossip_ts = 0;  // observation time, ordering key
    int64_t chain_ts = 0;   // on-chain timestamp (`ts` column)
    int64_t height = 0;
    std::string channel_id;  // "transaction_id:vout"
    std::string src;
    std::string dst;
    int64_t capacity = 0;            // sat
    double block_avg_fee_rate = 0.0;  // sat/vB
    ChannelStatus channel_status = ChannelStatus::Opening;
    EventLabel event_label = EventLabel::Open;
    PolicySnapshot src_policy;
    PolicySnapshot dst_policy;

    bool operator==(const GossipEvent&) const = default;
};

struct LogMeta {
    std::string source;
    std::size_t rows_parsed = 0;
    std::size_t rows_rejected = 0;
    std::size_t duplicates_dropped = 0;
    std::size_t twins_synthesized = 0;
};

// Events sorted by gossip_ts (stable w.r.t. input order), deduplicated on
// (channel_id, direction, status, gossip_ts).
struct EventLog {
    std::vector<GossipEvent> events;
    LogMeta meta;

    bool empty() const { return events.empty(); }
    std::size_t size() const { return events.size(); }
};

const char* to_string(ChannelStatus s);
const char* to_string(EventLabel l);
const char* to_string(Implementation i);

ChannelStatus channel_status_from_string(const std::string& s);  // throws std::invalid_argument
EventLabel event_label_from_string(const std::string& s);        // throws std::invalid_argument
Implementation implementation_from_string(const std::string& s); // unknown -> Other

}  // namespace lncb
