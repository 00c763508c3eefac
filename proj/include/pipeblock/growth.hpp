#pragma once

#include <limits>

#include "pipeblock/model.hpp"

namespace pipeblock {

// Stable-phase growth: how much the makespan gains per repeating period once
// warm-up is over. Computed on the quotient graph of one block period; one
// period of unrolling suffices for the maximum, extra periods are used as a
// self-check.
struct GrowthReport {
    int cycle_length = 0;                  // passes per device per period
    double growth = 0.0;                   // g, time gained per period
    std::vector<double> work_per_period;   // per device
    double max_work = 0.0;
    double repeating_bubble = 0.0;         // max(0, g - work)
    bool linear_bubble = false;            // O(n) when true, else O(d)
    bool tie = false;                      // g meets the work bound exactly
    std::vector<std::string> witness;      // passes along a maximal chain
};

namespace growth_detail {

struct Edge {
    int to;
    int period_shift;
    double weight;  // source duration plus hop latency
};

struct Quotient {
    int nodes = 0;
    std::vector<std::vector<Edge>> out;
    std::vector<long long> residue;
    std::vector<std::string> label;
};

inline Quotient build_quotient(const BuildingBlock& blk, const RunTimeProfile& profile) {
    if (blk.interval <= 0) throw std::invalid_argument("growth: interval must be positive");
    Quotient q;
    q.nodes = static_cast<int>(blk.passes.size());
    q.out.resize(q.nodes);
    q.residue.resize(q.nodes);
    q.label.resize(q.nodes);

    std::map<detail::PassKey, int> index;
    for (int i = 0; i < q.nodes; ++i) {
        const auto& p = blk.passes[i];
        q.residue[i] = ((p.offset % blk.interval) + blk.interval) % blk.interval;
        q.label[i] = pass_name(p.kind) + "(stage " + std::to_string(p.stage) + ", slot " +
                     std::to_string(p.microbatch) + ")";
        index[{p.stage, static_cast<int>(p.kind), p.microbatch}] = i;
    }
    auto find = [&](const PassRef& ref) -> std::optional<int> {
        auto it = index.find({ref.stage, static_cast<int>(ref.kind), ref.microbatch});
        if (it == index.end() && (ref.kind == PassKind::B || ref.kind == PassKind::BW)) {
            int other = static_cast<int>(ref.kind == PassKind::B ? PassKind::BW : PassKind::B);
            it = index.find({ref.stage, other, ref.microbatch});
        }
        if (it == index.end()) return std::nullopt;
        return it->second;
    };

    // device succession in residue order; the wrap-around edge crosses into
    // the next period
    std::map<int, std::vector<int>> by_dev;
    for (int i = 0; i < q.nodes; ++i) by_dev[blk.topology.device_of(blk.passes[i].stage)].push_back(i);
    for (auto& [dev, nodes] : by_dev) {
        std::sort(nodes.begin(), nodes.end(),
                  [&](int a, int b) { return q.residue[a] < q.residue[b]; });
        for (size_t k = 0; k < nodes.size(); ++k) {
            int u = nodes[k];
            int v = nodes[(k + 1) % nodes.size()];
            int shift = (k + 1 == nodes.size()) ? 1 : 0;
            q.out[u].push_back({v, shift, profile.of(blk.passes[u].kind)});
        }
    }

    // dependency edges; the period shift is the offset floor difference
    for (int v = 0; v < q.nodes; ++v) {
        const auto& p = blk.passes[v];
        for (const auto& dep : dependencies_of(blk.topology, {p.stage, p.kind, p.microbatch})) {
            auto u = find(dep);
            if (!u) continue;  // validated elsewhere
            long long shift = p.offset / blk.interval - blk.passes[*u].offset / blk.interval;
            double w = profile.of(blk.passes[*u].kind);
            if (blk.topology.device_of(blk.passes[*u].stage) != blk.topology.device_of(p.stage))
                w += profile.comm;
            q.out[*u].push_back({v, static_cast<int>(shift), w});
        }
    }
    return q;
}

// longest path from (source, period 0) to (source, period R-1) on the
// R-period unrolled DAG; nodes ordered by (period, residue) are topological
inline double unrolled_longest(const Quotient& q, int source, int periods,
                               std::vector<int>* parent_out = nullptr) {
    const double ninf = -std::numeric_limits<double>::infinity();
    int total = q.nodes * periods;
    std::vector<double> dist(total, ninf);
    std::vector<int> parent(total, -1);
    dist[source] = 0.0;

    std::vector<int> topo(total);
    for (int i = 0; i < total; ++i) topo[i] = i;
    std::sort(topo.begin(), topo.end(), [&](int a, int b) {
        return std::make_pair(a / q.nodes, q.residue[a % q.nodes]) <
               std::make_pair(b / q.nodes, q.residue[b % q.nodes]);
    });
    for (int id : topo) {
        if (dist[id] == ninf) continue;
        int u = id % q.nodes;
        int r = id / q.nodes;
        for (const auto& e : q.out[u]) {
            int nr = r + e.period_shift;
            if (nr >= periods) continue;
            int nid = nr * q.nodes + e.to;
            if (dist[id] + e.weight > dist[nid]) {
                dist[nid] = dist[id] + e.weight;
                parent[nid] = id;
            }
        }
    }
    if (parent_out) *parent_out = parent;
    return dist[(periods - 1) * q.nodes + source];
}

}  // namespace growth_detail

inline double growth_rate_unrolled(const BuildingBlock& blk, const RunTimeProfile& profile,
                                   int periods) {
    auto q = growth_detail::build_quotient(blk, profile);
    double best = 0.0;
    for (int s = 0; s < q.nodes; ++s)
        best = std::max(best, growth_detail::unrolled_longest(q, s, periods));
    return best;
}

inline GrowthReport growth_rate(const BuildingBlock& blk, const RunTimeProfile& profile) {
    auto q = growth_detail::build_quotient(blk, profile);
    GrowthReport rep;

    std::map<int, double> work;
    std::map<int, int> count;
    for (const auto& p : blk.passes) {
        int dev = blk.topology.device_of(p.stage);
        work[dev] += profile.of(p.kind);
        count[dev] += 1;
    }
    rep.work_per_period.assign(blk.topology.devices, 0.0);
    for (auto& [dev, w] : work) {
        rep.work_per_period[dev - 1] = w;
        rep.max_work = std::max(rep.max_work, w);
        rep.cycle_length = std::max(rep.cycle_length, count[dev]);
    }

    double best = 0.0;
    int best_source = -1;
    std::vector<int> best_parent;
    for (int s = 0; s < q.nodes; ++s) {
        std::vector<int> parent;
        double v = growth_detail::unrolled_longest(q, s, 2, &parent);
        if (v > best) {
            best = v;
            best_source = s;
            best_parent = std::move(parent);
        }
    }
    rep.growth = best;
    const double eps = 1e-9 * std::max(1.0, rep.max_work);
    rep.repeating_bubble = std::max(0.0, rep.growth - rep.max_work);
    rep.linear_bubble = rep.repeating_bubble > eps;
    rep.tie = std::abs(rep.growth - rep.max_work) <= eps;
    if (best_source >= 0) {
        int id = q.nodes + best_source;
        std::vector<std::string> chain;
        while (id >= 0) {
            chain.push_back(q.label[id % q.nodes] + "@period" + std::to_string(id / q.nodes));
            id = best_parent[id];
        }
        std::reverse(chain.begin(), chain.end());
        rep.witness = std::move(chain);
    }
    return rep;
}

// profile-robust O(d) bubble condition for the middle-memory v schedule
inline bool vhalf_condition(const RunTimeProfile& p) {
    return p.w + 2 * p.b >= 2 * p.f && p.w + 2 * p.f >= 2 * p.b;
}

// makespan lower bound for v-family unit-duration runs at peak k units of m
inline long long lower_bound(long long n, long long d, long long k) {
    if (k < 1 || k > 2 * d) throw std::invalid_argument("lower_bound: k must be in [1, 2d]");
    return std::max(6 * n, 6 * n + 6 * d - 3 * k - 1);
}

// minimum activation units (of m) any schedule needs to keep O(d) bubbles
// under arbitrary pass durations
inline double min_memory_for_od_bubble(int d) {
    if (d < 1) throw std::invalid_argument("min_memory_for_od_bubble: d must be positive");
    return 2.0 * d;
}

}  // namespace pipeblock
