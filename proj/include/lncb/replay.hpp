#pragma once

#include <cstdint>
#include <vector>

#include "lncb/event.hpp"

namespace lncb {

// Contiguous [begin, end) ranges of a sorted event log, one per distinct
// gossip_ts. Replay loops apply a whole group, then act on the snapshot.
struct TimestampGroup {
    int64_t ts = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

inline std::vector<TimestampGroup> group_by_timestamp(const EventLog& log) {
    std::vector<TimestampGroup> groups;
    std::size_t i = 0;
    while (i < log.events.size()) {
        const int64_t ts = log.events[i].gossip_ts;
        std::size_t j = i;
        while (j < log.events.size() && log.events[j].gossip_ts == ts) ++j;
        groups.push_back({ts, i, j});
        i = j;
    }
    return groups;
}

}  // namespace lncb
