#pragma once

#include "pipeblock/assemble.hpp"
#include "pipeblock/memory.hpp"
#include "pipeblock/model.hpp"

namespace pipeblock {

struct SimResult {
    TimedSchedule schedule;
    double makespan = 0.0;
    std::vector<double> busy;        // per device
    std::vector<double> idle_total;  // makespan minus busy
    std::vector<double> idle_span;   // idle between a device's first and last pass
    double bubble_rate = 0.0;
    DeviceValues peak;
};

// Replays the grid under real durations: every pass starts when its device
// predecessor (grid order preserved) and its prerequisites are done, plus a
// hop latency for prerequisites living on another device.
inline SimResult simulate(const GridSchedule& grid, const RunTimeProfile& profile) {
    SimResult res;
    TimedSchedule& out = res.schedule;
    out.topology = grid.topology;
    out.microbatches = grid.microbatches;
    out.passes.resize(grid.passes.size());
    for (size_t i = 0; i < grid.passes.size(); ++i) {
        const auto& g = grid.passes[i];
        out.passes[i] = {g.device, g.stage, g.kind, g.microbatch, 0.0, profile.of(g.kind)};
    }

    std::vector<size_t> order(grid.passes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const auto& pa = grid.passes[a];
        const auto& pb = grid.passes[b];
        return std::tie(pa.start, pa.device, pa.stage, pa.microbatch) <
               std::tie(pb.start, pb.device, pb.stage, pb.microbatch);
    });
    detail::PassIndex<long long> index(grid);
    std::vector<double> dev_free(grid.topology.devices + 1, 0.0);
    std::vector<char> placed(grid.passes.size(), 0);
    for (size_t oi : order) {
        const auto& g = grid.passes[oi];
        double at = dev_free[g.device];
        for (size_t di : index.dep_indices(g)) {
            if (!placed[di]) throw std::invalid_argument("simulate: prerequisite not ordered first");
            double ready = out.passes[di].end();
            if (grid.passes[di].device != g.device) ready += profile.comm;
            at = std::max(at, ready);
        }
        out.passes[oi].start = at;
        placed[oi] = 1;
        dev_free[g.device] = at + out.passes[oi].duration;
    }

    res.busy.assign(grid.topology.devices, 0.0);
    std::vector<double> first(grid.topology.devices, 0.0), last(grid.topology.devices, 0.0);
    std::vector<bool> seen(grid.topology.devices, false);
    for (const auto& p : out.passes) {
        res.makespan = std::max(res.makespan, p.end());
        res.busy[p.device - 1] += p.duration;
        if (!seen[p.device - 1]) {
            first[p.device - 1] = p.start;
            last[p.device - 1] = p.end();
            seen[p.device - 1] = true;
        } else {
            first[p.device - 1] = std::min(first[p.device - 1], p.start);
            last[p.device - 1] = std::max(last[p.device - 1], p.end());
        }
    }
    res.idle_total.assign(grid.topology.devices, 0.0);
    res.idle_span.assign(grid.topology.devices, 0.0);
    double total_busy = 0.0;
    for (int dev = 0; dev < grid.topology.devices; ++dev) {
        res.idle_total[dev] = res.makespan - res.busy[dev];
        res.idle_span[dev] = seen[dev] ? (last[dev] - first[dev]) - res.busy[dev] : 0.0;
        total_busy += res.busy[dev];
    }
    res.bubble_rate =
        res.makespan > 0 ? 1.0 - total_busy / (grid.topology.devices * res.makespan) : 0.0;
    res.peak = exact_peak(out);
    detail::sort_canonical(out);
    return res;
}

struct CompareRow {
    std::string name;
    bool ok = false;
    std::string error;
    double makespan = 0.0;
    double bubble_rate = 0.0;
    double peak = 0.0;
};

// Assembles and simulates each entry; failed rows carry the error instead of
// stopping the table.
template <typename BuildFn>
std::vector<CompareRow> compare(const std::vector<std::string>& entries, int n,
                                const RunTimeProfile& profile, BuildFn&& build_fn) {
    std::vector<CompareRow> rows;
    for (const auto& name : entries) {
        CompareRow row;
        row.name = name;
        try {
            auto build = build_fn(name);
            GridSchedule sched = assemble(build, n);
            SimResult sim = simulate(sched, profile);
            row.ok = true;
            row.makespan = sim.makespan;
            row.bubble_rate = sim.bubble_rate;
            row.peak = sim.peak.max;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace pipeblock
