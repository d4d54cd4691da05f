#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lncb/event.hpp"
#include "lncb/labeling.hpp"

namespace lncb {

class InvalidParams : public std::invalid_argument {
public:
    explicit InvalidParams(const std::string& what) : std::invalid_argument(what) {}
};

// Parametric gossip stream with ground-truth closure times. Per-node
// reliability drives the closure hazard, so node history carries real signal
// and a trained classifier has something to find.
struct SynthParams {
    int n_nodes = 1000;
    double span_days = 120.0;
    double snapshots_per_day = 1.0;
    double open_rate = 50.0;    // expected openings per snapshot (Poisson)
    int warm_channels = 500;    // channels present in the initial snapshot
    double h0 = 0.02;           // daily closure hazard scale
    double forced_mix = 0.5;    // share of closures that are forced
    double mix_slope = 0.0;     // tilt of the forced share by pair unreliability
    double penalty_rate = 0.05; // share of forced closures gossiped as penalty
    double missing_rate = 0.02; // chance each optional policy field is absent
    uint64_t seed = 0;
    int64_t t0 = 1'654'732'800; // first snapshot timestamp

    void validate() const;  // throws InvalidParams
};

struct ScheduledClosure {
    std::string channel_id;
    std::string src, dst;  // canonical direction (src < dst)
    int64_t close_ts = 0;
    Label label = Label::Forced;
};

struct SynthResult {
    EventLog log;  // sorted, both directions emitted per channel
    std::vector<ScheduledClosure> schedule;
    std::vector<double> reliability;  // per node index
};

SynthResult generate(const SynthParams& params);

std::string synth_node_name(int index);

void write_schedule_csv(const std::vector<ScheduledClosure>& schedule, std::ostream& out);

}  // namespace lncb
