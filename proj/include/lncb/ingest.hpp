#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lncb/event.hpp"

namespace lncb {

enum class LogFormat { Csv, Jsonl };

LogFormat log_format_from_string(const std::string& s);  // "csv" | "jsonl"

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyInput : IngestError {
    EmptyInput() : IngestError("empty input: no events") {}
    explicit EmptyInput(const std::string& what) : IngestError(what) {}
};
struct MissingColumn : IngestError {
    explicit MissingColumn(const std::string& col)
        : IngestError("missing required column: " + col) {}
};
struct MalformedRow : IngestError {
    MalformedRow(std::size_t row_index, const std::string& reason)
        : IngestError("row " + std::to_string(row_index) + ": " + reason), row(row_index) {}
    std::size_t row;
};

struct RowError {
    std::size_t row;  // 1-based data row index (header excluded for CSV)
    std::string reason;
};

struct ParseDiagnostics {
    std::vector<RowError> rejected;
    std::size_t duplicates_dropped = 0;
    std::size_t twins_synthesized = 0;
};

struct ParseOptions {
    bool strict = false;            // throw MalformedRow on first bad row
    std::size_t max_reported_errors = 1000;
};

// Parses CSV or JSONL into a chronologically sorted, deduplicated EventLog.
// Missing reverse-direction twins are synthesized (see ingest notes in the
// README). Malformed rows are rejected and reported through `diag` unless
// opts.strict is set. Throws EmptyInput / MissingColumn.
EventLog parse_events(std::istream& in, LogFormat fmt, ParseDiagnostics* diag = nullptr,
                      const ParseOptions& opts = {});
EventLog parse_events_file(const std::string& path, LogFormat fmt,
                           ParseDiagnostics* diag = nullptr, const ParseOptions& opts = {});

void serialize_events(const EventLog& log, std::ostream& out, LogFormat fmt);
void serialize_events_file(const EventLog& log, const std::string& path, LogFormat fmt);

// Event <-> JSON object in the JSONL schema (shared with state checkpoints).
nlohmann::json event_to_json(const GossipEvent& e);
GossipEvent event_from_json(const nlohmann::json& j);

struct FilterStats {
    std::size_t pairs_total = 0;
    std::size_t pairs_removed = 0;
    std::size_t events_removed = 0;
};

// Removes every unordered node pair backed by more than one channel_id,
// together with all of its events in both directions. Idempotent.
EventLog filter_parallel_channels(const EventLog& log, FilterStats* stats = nullptr);

struct WarmSplit {
    EventLog warm;      // all events at the minimum gossip_ts; state-only
    EventLog timeline;  // the remainder, used for training/evaluation
};

WarmSplit split_warm_start(const EventLog& log);  // throws EmptyInput on empty log

struct DatasetStats {
    std::size_t events = 0;
    std::size_t distinct_timestamps = 0;
    std::size_t unique_nodes = 0;
    std::size_t unique_channels = 0;
    std::size_t opening_events = 0;
    std::size_t closing_events = 0;
    std::size_t label_open = 0;
    std::size_t label_mutual = 0;
    std::size_t label_forced = 0;
    std::size_t label_penalty = 0;
};

DatasetStats dataset_stats(const EventLog& log);
nlohmann::json to_json(const DatasetStats& s);

}  // namespace lncb
