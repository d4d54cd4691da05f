#include "lncb/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace lncb {

namespace {

const std::array<const char*, 27> kCsvColumns = {
    "gossip_ts", "ts", "height", "transaction_id", "vout", "src", "dst",
    "capacity", "block_avg_fee_rate", "channel_status", "event_label",
    "src_fee_base_msat", "src_fee_rate_milli_msat", "src_min_htlc", "src_max_htlc_msat",
    "src_time_lock_delta", "src_disabled", "src_last_update", "src_implementation",
    "dst_fee_base_msat", "dst_fee_rate_milli_msat", "dst_min_htlc", "dst_max_htlc_msat",
    "dst_time_lock_delta", "dst_disabled", "dst_last_update", "dst_implementation"};

const std::array<const char*, 8> kPolicyFields = {
    "fee_base_msat", "fee_rate_milli_msat", "min_htlc", "max_htlc_msat",
    "time_lock_delta", "disabled", "last_update", "implementation"};

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

int64_t parse_i64(std::string_view v, const char* field) {
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw std::invalid_argument(std::string("bad integer for ") + field);
    return out;
}

double parse_f64(std::string_view v, const char* field) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw std::invalid_argument(std::string("bad number for ") + field);
    return out;
}

bool parse_bool(std::string_view v, const char* field) {
    const std::string s = lower(std::string(v));
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw std::invalid_argument(std::string("bad boolean for ") + field);
}

void validate_event(const GossipEvent& e) {
    if (e.gossip_ts < 0) throw std::invalid_argument("gossip_ts < 0");
    if (e.capacity < 0) throw std::invalid_argument("capacity < 0");
    if (e.height < 0) throw std::invalid_argument("height < 0");
    if (e.src.empty() || e.dst.empty()) throw std::invalid_argument("empty node id");
    if (e.src == e.dst) throw std::invalid_argument("src == dst");
    if (e.channel_id.empty()) throw std::invalid_argument("empty channel_id");
    if (e.channel_status == ChannelStatus::Opening && e.event_label != EventLabel::Open)
        throw std::invalid_argument("opening event with closure label");
    if (e.channel_status == ChannelStatus::Closing && e.event_label == EventLabel::Open)
        throw std::invalid_argument("closing event labeled open");
    for (const PolicySnapshot* p : {&e.src_policy, &e.dst_policy}) {
        if (p->min_htlc && p->max_htlc_msat && *p->min_htlc > *p->max_htlc_msat)
            throw std::invalid_argument("min_htlc > max_htlc_msat");
    }
}

// --- CSV ------------------------------------------------------------------

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

void parse_policy_fields(const std::vector<std::string_view>& f, const std::vector<int>& idx,
                         int base, PolicySnapshot& p) {
    auto field = [&](int k) -> std::string_view { return f[static_cast<std::size_t>(idx[static_cast<std::size_t>(base + k)])]; };
    auto opt_i64 = [&](int k, const char* name) -> std::optional<int64_t> {
        const auto v = field(k);
        if (v.empty()) return std::nullopt;
        return parse_i64(v, name);
    };
    p.fee_base_msat = opt_i64(0, "fee_base_msat");
    p.fee_rate_milli_msat = opt_i64(1, "fee_rate_milli_msat");
    p.min_htlc = opt_i64(2, "min_htlc");
    p.max_htlc_msat = opt_i64(3, "max_htlc_msat");
    p.time_lock_delta = opt_i64(4, "time_lock_delta");
    if (const auto v = field(5); !v.empty()) p.disabled = parse_bool(v, "disabled");
    p.last_update = opt_i64(6, "last_update");
    p.implementation = implementation_from_string(std::string(field(7)));
}

GossipEvent parse_csv_row(const std::vector<std::string_view>& f, const std::vector<int>& idx) {
    auto field = [&](int k) -> std::string_view { return f[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])]; };
    GossipEvent e;
    e.gossip_ts = parse_i64(field(0), "gossip_ts");
    e.chain_ts = parse_i64(field(1), "ts");
    e.height = parse_i64(field(2), "height");
    const int64_t vout = parse_i64(field(4), "vout");
    if (vout < 0) throw std::invalid_argument("vout < 0");
    e.channel_id = std::string(field(3)) + ":" + std::to_string(vout);
    e.src = std::string(field(5));
    e.dst = std::string(field(6));
    e.capacity = parse_i64(field(7), "capacity");
    e.block_avg_fee_rate = parse_f64(field(8), "block_avg_fee_rate");
    e.channel_status = channel_status_from_string(std::string(field(9)));
    e.event_label = event_label_from_string(std::string(field(10)));
    parse_policy_fields(f, idx, 11, e.src_policy);
    parse_policy_fields(f, idx, 19, e.dst_policy);
    validate_event(e);
    return e;
}

std::vector<GossipEvent> parse_csv(std::istream& in, ParseDiagnostics& diag,
                                   const ParseOptions& opts, std::size_t& rows_parsed) {
    std::string line;
    if (!std::getline(in, line)) throw EmptyInput();
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_csv_line(line);
    std::unordered_map<std::string_view, int> pos;
    for (std::size_t i = 0; i < header.size(); ++i) pos.emplace(header[i], static_cast<int>(i));
    std::vector<int> idx(kCsvColumns.size());
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
        auto it = pos.find(kCsvColumns[i]);
        if (it == pos.end()) throw MissingColumn(kCsvColumns[i]);
        idx[i] = it->second;
    }
    const std::size_t n_cols = header.size();

    std::vector<GossipEvent> events;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        ++rows_parsed;
        try {
            const auto fields = split_csv_line(line);
            if (fields.size() != n_cols)
                throw std::invalid_argument("expected " + std::to_string(n_cols) + " fields, got " +
                                            std::to_string(fields.size()));
            events.push_back(parse_csv_row(fields, idx));
        } catch (const std::exception& ex) {
            if (opts.strict) throw MalformedRow(row, ex.what());
            if (diag.rejected.size() < opts.max_reported_errors)
                diag.rejected.push_back({row, ex.what()});
        }
    }
    return events;
}

// --- JSONL ----------------------------------------------------------------

std::vector<GossipEvent> parse_jsonl(std::istream& in, ParseDiagnostics& diag,
                                     const ParseOptions& opts, std::size_t& rows_parsed) {
    std::vector<GossipEvent> events;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        ++rows_parsed;
        try {
            events.push_back(event_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& ex) {
            if (opts.strict) throw MalformedRow(row, ex.what());
            if (diag.rejected.size() < opts.max_reported_errors)
                diag.rejected.push_back({row, ex.what()});
        }
    }
    return events;
}

// --- post-processing ------------------------------------------------------

std::string dedup_key(const GossipEvent& e) {
    std::string k;
    k.reserve(e.channel_id.size() + e.src.size() + e.dst.size() + 24);
    k += e.channel_id;
    k += '\x1f';
    k += e.src;
    k += '\x1f';
    k += e.dst;
    k += '\x1f';
    k += e.channel_status == ChannelStatus::Opening ? 'o' : 'c';
    k += std::to_string(e.gossip_ts);
    return k;
}

std::string group_key(const GossipEvent& e) {
    std::string k;
    k.reserve(e.channel_id.size() + 24);
    k += e.channel_id;
    k += '\x1f';
    k += e.channel_status == ChannelStatus::Opening ? 'o' : 'c';
    k += std::to_string(e.gossip_ts);
    return k;
}

GossipEvent make_twin(const GossipEvent& e) {
    GossipEvent t = e;
    std::swap(t.src, t.dst);
    std::swap(t.src_policy, t.dst_policy);
    return t;
}

}  // namespace

const char* to_string(ChannelStatus s) {
    return s == ChannelStatus::Opening ? "opening" : "closing";
}

const char* to_string(EventLabel l) {
    switch (l) {
        case EventLabel::Open: return "open";
        case EventLabel::Mutual: return "mutual";
        case EventLabel::Forced: return "forced";
        case EventLabel::Penalty: return "penalty";
    }
    return "open";
}

const char* to_string(Implementation i) {
    switch (i) {
        case Implementation::Lnd: return "LND";
        case Implementation::Cln: return "CLN";
        case Implementation::Eclair: return "Eclair";
        case Implementation::Ldk: return "LDK";
        case Implementation::Other: return "Other";
    }
    return "Other";
}

ChannelStatus channel_status_from_string(const std::string& s) {
    const std::string v = lower(s);
    if (v == "opening") return ChannelStatus::Opening;
    if (v == "closing") return ChannelStatus::Closing;
    throw std::invalid_argument("bad channel_status: " + s);
}

EventLabel event_label_from_string(const std::string& s) {
    const std::string v = lower(s);
    if (v == "open") return EventLabel::Open;
    if (v == "mutual") return EventLabel::Mutual;
    if (v == "forced") return EventLabel::Forced;
    if (v == "penalty") return EventLabel::Penalty;
    throw std::invalid_argument("bad event_label: " + s);
}

Implementation implementation_from_string(const std::string& s) {
    const std::string v = lower(s);
    if (v == "lnd") return Implementation::Lnd;
    if (v == "cln" || v == "core_lightning" || v == "corelightning" || v == "c-lightning")
        return Implementation::Cln;
    if (v == "eclair") return Implementation::Eclair;
    if (v == "ldk") return Implementation::Ldk;
    return Implementation::Other;
}

LogFormat log_format_from_string(const std::string& s) {
    const std::string v = lower(s);
    if (v == "csv") return LogFormat::Csv;
    if (v == "jsonl") return LogFormat::Jsonl;
    throw std::invalid_argument("bad format (expected csv or jsonl): " + s);
}

EventLog parse_events(std::istream& in, LogFormat fmt, ParseDiagnostics* diag,
                      const ParseOptions& opts) {
    ParseDiagnostics local;
    ParseDiagnostics& d = diag ? *diag : local;

    EventLog log;
    std::vector<GossipEvent> events = fmt == LogFormat::Csv
                                          ? parse_csv(in, d, opts, log.meta.rows_parsed)
                                          : parse_jsonl(in, d, opts, log.meta.rows_parsed);
    log.meta.rows_rejected = d.rejected.size();

    if (events.empty()) {
        if (log.meta.rows_parsed > 0)
            throw EmptyInput("empty input: all " + std::to_string(log.meta.rows_parsed) +
                             " rows were rejected");
        throw EmptyInput();
    }

    std::stable_sort(events.begin(), events.end(),
                     [](const GossipEvent& a, const GossipEvent& b) { return a.gossip_ts < b.gossip_ts; });

    // Gossip re-broadcasts: keep the first occurrence of each
    // (channel, direction, status, timestamp).
    std::unordered_set<std::string> seen;
    seen.reserve(events.size() * 2);
    std::vector<GossipEvent> deduped;
    deduped.reserve(events.size());
    for (auto& e : events) {
        if (seen.insert(dedup_key(e)).second) {
            deduped.push_back(std::move(e));
        } else {
            ++d.duplicates_dropped;
        }
    }
    log.meta.duplicates_dropped = d.duplicates_dropped;

    // Single-direction channel events get a synthesized reverse twin so that
    // downstream replay always sees paired directed edges.
    std::unordered_map<std::string, int> directions;
    directions.reserve(deduped.size() * 2);
    for (const auto& e : deduped) ++directions[group_key(e)];
    log.events.reserve(deduped.size());
    for (auto& e : deduped) {
        const bool lone = directions[group_key(e)] == 1;
        log.events.push_back(std::move(e));
        if (lone) {
            log.events.push_back(make_twin(log.events.back()));
            ++d.twins_synthesized;
        }
    }
    log.meta.twins_synthesized = d.twins_synthesized;
    return log;
}

EventLog parse_events_file(const std::string& path, LogFormat fmt, ParseDiagnostics* diag,
                           const ParseOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open input file: " + path);
    EventLog log = parse_events(in, fmt, diag, opts);
    log.meta.source = path;
    return log;
}

namespace {

void write_csv(const EventLog& log, std::ostream& out) {
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
        if (i) out << ',';
        out << kCsvColumns[i];
    }
    out << '\n';

    char buf[32];
    auto fmt_double = [&](double v) -> const char* {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    };
    auto opt = [](const std::optional<int64_t>& v) -> std::string {
        return v ? std::to_string(*v) : std::string();
    };
    for (const auto& e : log.events) {
        const std::size_t colon = e.channel_id.rfind(':');
        const std::string tx = e.channel_id.substr(0, colon);
        const std::string vout =
            colon == std::string::npos ? "0" : e.channel_id.substr(colon + 1);
        out << e.gossip_ts << ',' << e.chain_ts << ',' << e.height << ',' << tx << ',' << vout
            << ',' << e.src << ',' << e.dst << ',' << e.capacity << ','
            << fmt_double(e.block_avg_fee_rate) << ',' << to_string(e.channel_status) << ','
            << to_string(e.event_label);
        for (const PolicySnapshot* p : {&e.src_policy, &e.dst_policy}) {
            out << ',' << opt(p->fee_base_msat) << ',' << opt(p->fee_rate_milli_msat) << ','
                << opt(p->min_htlc) << ',' << opt(p->max_htlc_msat) << ','
                << opt(p->time_lock_delta) << ',';
            if (p->disabled) out << (*p->disabled ? '1' : '0');
            out << ',' << opt(p->last_update) << ',' << to_string(p->implementation);
        }
        out << '\n';
    }
}

nlohmann::json policy_to_json(const PolicySnapshot& p) {
    nlohmann::json j = nlohmann::json::object();
    if (p.fee_base_msat) j["fee_base_msat"] = *p.fee_base_msat;
    if (p.fee_rate_milli_msat) j["fee_rate_milli_msat"] = *p.fee_rate_milli_msat;
    if (p.min_htlc) j["min_htlc"] = *p.min_htlc;
    if (p.max_htlc_msat) j["max_htlc_msat"] = *p.max_htlc_msat;
    if (p.time_lock_delta) j["time_lock_delta"] = *p.time_lock_delta;
    if (p.disabled) j["disabled"] = *p.disabled;
    if (p.last_update) j["last_update"] = *p.last_update;
    j["implementation"] = to_string(p.implementation);
    return j;
}

PolicySnapshot policy_from_json(const nlohmann::json& j) {
    PolicySnapshot p;
    auto opt_i64 = [&](const char* k) -> std::optional<int64_t> {
        auto it = j.find(k);
        if (it == j.end() || it->is_null()) return std::nullopt;
        return it->get<int64_t>();
    };
    p.fee_base_msat = opt_i64("fee_base_msat");
    p.fee_rate_milli_msat = opt_i64("fee_rate_milli_msat");
    p.min_htlc = opt_i64("min_htlc");
    p.max_htlc_msat = opt_i64("max_htlc_msat");
    p.time_lock_delta = opt_i64("time_lock_delta");
    if (auto it = j.find("disabled"); it != j.end() && !it->is_null()) p.disabled = it->get<bool>();
    p.last_update = opt_i64("last_update");
    if (auto it = j.find("implementation"); it != j.end() && !it->is_null())
        p.implementation = implementation_from_string(it->get<std::string>());
    return p;
}

}  // namespace

nlohmann::json event_to_json(const GossipEvent& e) {
    const std::size_t colon = e.channel_id.rfind(':');
    nlohmann::json j;
    j["gossip_ts"] = e.gossip_ts;
    j["ts"] = e.chain_ts;
    j["height"] = e.height;
    j["transaction_id"] = e.channel_id.substr(0, colon);
    j["vout"] = colon == std::string::npos
                    ? 0
                    : parse_i64(std::string_view(e.channel_id).substr(colon + 1), "vout");
    j["src"] = e.src;
    j["dst"] = e.dst;
    j["capacity"] = e.capacity;
    j["block_avg_fee_rate"] = e.block_avg_fee_rate;
    j["channel_status"] = to_string(e.channel_status);
    j["event_label"] = to_string(e.event_label);
    j["src_policy"] = policy_to_json(e.src_policy);
    j["dst_policy"] = policy_to_json(e.dst_policy);
    return j;
}

GossipEvent event_from_json(const nlohmann::json& j) {
    GossipEvent e;
    e.gossip_ts = j.at("gossip_ts").get<int64_t>();
    e.chain_ts = j.at("ts").get<int64_t>();
    e.height = j.at("height").get<int64_t>();
    const int64_t vout = j.at("vout").get<int64_t>();
    if (vout < 0) throw std::invalid_argument("vout < 0");
    e.channel_id = j.at("transaction_id").get<std::string>() + ":" + std::to_string(vout);
    e.src = j.at("src").get<std::string>();
    e.dst = j.at("dst").get<std::string>();
    e.capacity = j.at("capacity").get<int64_t>();
    e.block_avg_fee_rate = j.at("block_avg_fee_rate").get<double>();
    e.channel_status = channel_status_from_string(j.at("channel_status").get<std::string>());
    e.event_label = event_label_from_string(j.at("event_label").get<std::string>());
    if (auto it = j.find("src_policy"); it != j.end() && !it->is_null())
        e.src_policy = policy_from_json(*it);
    if (auto it = j.find("dst_policy"); it != j.end() && !it->is_null())
        e.dst_policy = policy_from_json(*it);
    validate_event(e);
    return e;
}

void serialize_events(const EventLog& log, std::ostream& out, LogFormat fmt) {
    if (fmt == LogFormat::Csv) {
        write_csv(log, out);
        return;
    }
    for (const auto& e : log.events) out << event_to_json(e).dump() << '\n';
}

void serialize_events_file(const EventLog& log, const std::string& path, LogFormat fmt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("cannot open output file: " + path);
    serialize_events(log, out, fmt);
}

EventLog filter_parallel_channels(const EventLog& log, FilterStats* stats) {
    auto pair_key = [](const GossipEvent& e) {
        return e.src < e.dst ? e.src + '\x1f' + e.dst : e.dst + '\x1f' + e.src;
    };

    std::unordered_map<std::string, std::unordered_set<std::string>> channels_by_pair;
    for (const auto& e : log.events) channels_by_pair[pair_key(e)].insert(e.channel_id);

    std::unordered_set<std::string> removed_pairs;
    for (const auto& [pair, channels] : channels_by_pair)
        if (channels.size() >= 2) removed_pairs.insert(pair);

    EventLog out;
    out.meta = log.meta;
    out.events.reserve(log.events.size());
    for (const auto& e : log.events)
        if (!removed_pairs.count(pair_key(e))) out.events.push_back(e);

    if (stats) {
        stats->pairs_total = channels_by_pair.size();
        stats->pairs_removed = removed_pairs.size();
        stats->events_removed = log.events.size() - out.events.size();
    }
    return out;
}

WarmSplit split_warm_start(const EventLog& log) {
    if (log.empty()) throw EmptyInput("split_warm_start: empty log");
    const int64_t t0 = log.events.front().gossip_ts;
    WarmSplit split;
    split.warm.meta = log.meta;
    split.timeline.meta = log.meta;
    for (const auto& e : log.events)
        (e.gossip_ts == t0 ? split.warm : split.timeline).events.push_back(e);
    return split;
}

DatasetStats dataset_stats(const EventLog& log) {
    DatasetStats s;
    s.events = log.events.size();
    std::unordered_set<std::string> nodes;
    std::unordered_set<std::string> channels;
    int64_t prev_ts = -1;
    for (const auto& e : log.events) {
        if (e.gossip_ts != prev_ts) {
            ++s.distinct_timestamps;
            prev_ts = e.gossip_ts;
        }
        nodes.insert(e.src);
        nodes.insert(e.dst);
        channels.insert(e.channel_id);
        if (e.channel_status == ChannelStatus::Opening)
            ++s.opening_events;
        else
            ++s.closing_events;
        switch (e.event_label) {
            case EventLabel::Open: ++s.label_open; break;
            case EventLabel::Mutual: ++s.label_mutual; break;
            case EventLabel::Forced: ++s.label_forced; break;
            case EventLabel::Penalty: ++s.label_penalty; break;
        }
    }
    s.unique_nodes = nodes.size();
    s.unique_channels = channels.size();
    return s;
}

nlohmann::json to_json(const DatasetStats& s) {
    return nlohmann::json{{"events", s.events},
                          {"distinct_timestamps", s.distinct_timestamps},
                          {"unique_nodes", s.unique_nodes},
                          {"unique_channels", s.unique_channels},
                          {"opening_events", s.opening_events},
                          {"closing_events", s.closing_events},
                          {"labels",
                           {{"open", s.label_open},
                            {"mutual", s.label_mutual},
                            {"forced", s.label_forced},
                            {"penalty", s.label_penalty}}}};
}

}  // namespace lncb
