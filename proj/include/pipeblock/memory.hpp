#pragma once

#include <cmath>
#include <sstream>

#include "pipeblock/model.hpp"

namespace pipeblock {

// Activation lifespan of one (stage, slot) inside a block: allocated when F
// starts, released when the matching W (or fused BW) ends.
struct Lifespan {
    int stage = 0;
    int slot = 0;
    long long f_start = 0;
    long long release = 0;
    long long length() const { return release - f_start; }
};

inline std::vector<Lifespan> lifespans(const BuildingBlock& blk) {
    std::map<std::pair<int, int>, Lifespan> by_key;
    for (const auto& p : blk.passes) {
        auto& ls = by_key[{p.stage, p.microbatch}];
        ls.stage = p.stage;
        ls.slot = p.microbatch;
        if (p.kind == PassKind::F) ls.f_start = p.offset;
        if (p.kind == PassKind::W || p.kind == PassKind::BW)
            ls.release = p.offset + pass_width(p.kind);
    }
    std::vector<Lifespan> out;
    out.reserve(by_key.size());
    for (auto& [key, ls] : by_key) out.push_back(ls);
    return out;
}

struct DeviceValues {
    std::vector<double> per_device;  // index device-1
    double max = 0.0;

    void finish() {
        max = 0.0;
        for (double v : per_device) max = std::max(max, v);
    }
};

// Steady-state bound under uniform repeat at the block interval: each
// (stage, slot) keeps ceil(lifespan / T) activations in flight on its device.
inline DeviceValues peak_bound(const BuildingBlock& blk) {
    if (blk.interval <= 0) throw std::invalid_argument("peak_bound: interval must be positive");
    DeviceValues out;
    out.per_device.assign(blk.topology.devices, 0.0);
    for (const auto& ls : lifespans(blk)) {
        int dev = blk.topology.device_of(ls.stage);
        double copies = static_cast<double>((ls.length() + blk.interval - 1) / blk.interval);
        out.per_device[dev - 1] += copies * blk.topology.mem_of(ls.stage);
    }
    out.finish();
    return out;
}

// Exact peak by event sweep over a full schedule: + at F start, - when the
// releasing pass ends, releases processed first on ties.
template <typename Dur>
DeviceValues exact_peak(const ScheduleT<Dur>& sched) {
    struct Event {
        Dur time;
        int order;  // releases first
        int device;
        double delta;
    };
    std::vector<Event> events;
    events.reserve(sched.passes.size());
    for (const auto& p : sched.passes) {
        double m = sched.topology.mem_of(p.stage);
        if (p.kind == PassKind::F) events.push_back({p.start, 1, p.device, m});
        if (p.kind == PassKind::W || p.kind == PassKind::BW)
            events.push_back({p.end(), 0, p.device, -m});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return std::tie(a.time, a.order) < std::tie(b.time, b.order);
    });
    DeviceValues out;
    out.per_device.assign(sched.topology.devices, 0.0);
    std::vector<double> cur(sched.topology.devices, 0.0);
    for (const auto& e : events) {
        cur[e.device - 1] += e.delta;
        out.per_device[e.device - 1] = std::max(out.per_device[e.device - 1], cur[e.device - 1]);
    }
    out.finish();
    return out;
}

// Exact steady-state peak of the block's uniform repetition: sweep enough
// periods that every lifespan reaches its full stack. Copies alive at a cell
// only grow toward the middle of a repetition, so the maximum over a
// saturated finite run equals the infinite-repeat value.
inline DeviceValues steady_peak(const BuildingBlock& blk) {
    if (blk.interval <= 0) throw std::invalid_argument("steady_peak: interval must be positive");
    auto spans = lifespans(blk);
    long long periods = 2;
    for (const auto& ls : spans)
        periods = std::max(periods, (ls.length() + blk.interval - 1) / blk.interval + 2);
    struct Event {
        long long time;
        int order;
        int device;
        double delta;
    };
    std::vector<Event> events;
    events.reserve(spans.size() * periods * 2);
    for (const auto& ls : spans) {
        int dev = blk.topology.device_of(ls.stage);
        double m = blk.topology.mem_of(ls.stage);
        for (long long j = 0; j < periods; ++j) {
            events.push_back({ls.f_start + j * blk.interval, 1, dev, m});
            events.push_back({ls.release + j * blk.interval, 0, dev, -m});
        }
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return std::tie(a.time, a.order) < std::tie(b.time, b.order);
    });
    DeviceValues out;
    out.per_device.assign(blk.topology.devices, 0.0);
    std::vector<double> cur(blk.topology.devices, 0.0);
    for (const auto& e : events) {
        cur[e.device - 1] += e.delta;
        out.per_device[e.device - 1] = std::max(out.per_device[e.device - 1], cur[e.device - 1]);
    }
    out.finish();
    return out;
}

template <typename Dur>
struct TraceRow {
    Dur time;
    int device;
    double units;
};

// Piecewise-constant allocation trace, one row per device per change point.
template <typename Dur>
std::vector<TraceRow<Dur>> memory_trace(const ScheduleT<Dur>& sched) {
    struct Event {
        Dur time;
        int order;
        int device;
        double delta;
    };
    std::vector<Event> events;
    for (const auto& p : sched.passes) {
        double m = sched.topology.mem_of(p.stage);
        if (p.kind == PassKind::F) events.push_back({p.start, 1, p.device, m});
        if (p.kind == PassKind::W || p.kind == PassKind::BW)
            events.push_back({p.end(), 0, p.device, -m});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return std::tie(a.time, a.order, a.device) < std::tie(b.time, b.order, b.device);
    });
    std::vector<double> cur(sched.topology.devices, 0.0);
    std::vector<TraceRow<Dur>> rows;
    for (size_t i = 0; i < events.size(); ++i) {
        cur[events[i].device - 1] += events[i].delta;
        bool last_at_time = i + 1 == events.size() || events[i + 1].time != events[i].time ||
                            events[i + 1].device != events[i].device;
        if (last_at_time)
            rows.push_back({events[i].time, events[i].device, cur[events[i].device - 1]});
    }
    return rows;
}

template <typename Dur>
std::string trace_csv(const std::vector<TraceRow<Dur>>& rows) {
    std::string out = "time,device,allocated_units\n";
    for (const auto& r : rows) {
        std::ostringstream line;
        line << r.time << ',' << r.device << ',' << r.units << '\n';
        out += line.str();
    }
    return out;
}

// Bound-vs-exact comparison for an assembled schedule of the same block.
struct BoundCheck {
    DeviceValues bound;
    DeviceValues exact;
    bool holds = false;
};

inline BoundCheck check_bound(const BuildingBlock& blk, const GridSchedule& sched) {
    BoundCheck c;
    c.bound = peak_bound(blk);
    c.exact = exact_peak(sched);
    c.holds = true;
    for (int dev = 0; dev < blk.topology.devices; ++dev)
        if (c.exact.per_device[dev] > c.bound.per_device[dev] + 1e-9) c.holds = false;
    return c;
}

}  // namespace pipeblock
