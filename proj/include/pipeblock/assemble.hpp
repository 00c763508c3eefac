#pragma once

#include <unordered_map>

#include "pipeblock/memory.hpp"
#include "pipeblock/model.hpp"

namespace pipeblock {

namespace detail {

// (stage, kind, microbatch) -> pass position lookup for a schedule
template <typename Dur>
class PassIndex {
  public:
    explicit PassIndex(const ScheduleT<Dur>& sched) : sched_(&sched) {
        map_.reserve(sched.passes.size() * 2);
        for (size_t i = 0; i < sched.passes.size(); ++i) {
            const auto& p = sched.passes[i];
            map_[key(p.stage, p.kind, p.microbatch)] = i;
        }
    }

    // backward deps resolve against split or fused forms interchangeably
    std::optional<size_t> find(int stage, PassKind kind, int mb) const {
        auto it = map_.find(key(stage, kind, mb));
        if (it == map_.end() && (kind == PassKind::B || kind == PassKind::BW)) {
            PassKind other = kind == PassKind::B ? PassKind::BW : PassKind::B;
            it = map_.find(key(stage, other, mb));
        }
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<size_t> dep_indices(const ScheduledPassT<Dur>& p) const {
        std::vector<size_t> out;
        for (const auto& dep : dependencies_of(sched_->topology, {p.stage, p.kind, p.microbatch}))
            if (auto i = find(dep.stage, dep.kind, dep.microbatch)) out.push_back(*i);
        return out;
    }

  private:
    static long long key(int stage, PassKind kind, int mb) {
        return (static_cast<long long>(mb) * 4096 + stage) * 4 + static_cast<int>(kind);
    }
    const ScheduleT<Dur>* sched_;
    std::unordered_map<long long, size_t> map_;
};

template <typename Dur>
void sort_canonical(ScheduleT<Dur>& sched) {
    std::sort(sched.passes.begin(), sched.passes.end(),
              [](const ScheduledPassT<Dur>& a, const ScheduledPassT<Dur>& b) {
                  return std::tie(a.device, a.start, a.stage, a.microbatch) <
                         std::tie(b.device, b.start, b.stage, b.microbatch);
              });
}

}  // namespace detail

struct GridCollision {
    int device = 0;
    long long cell = 0;
    GridPass first, second;

    std::string str() const {
        auto one = [](const GridPass& p) {
            return pass_name(p.kind) + "(stage " + std::to_string(p.stage) + ", microbatch " +
                   std::to_string(p.microbatch) + ")";
        };
        return "collision on device " + std::to_string(device) + " at cell " +
               std::to_string(cell) + ": " + one(first) + " vs " + one(second);
    }
};

struct RepeatResult {
    GridSchedule schedule;
    std::optional<GridCollision> collision;
    bool ok() const { return !collision.has_value(); }
};

// Lays out `instances` copies of the block. Uniform patterns shift copy j by
// j * interval; explicit patterns take their starts list. The first clash in
// device-major, cell-minor order is reported.
inline RepeatResult repeat(const BuildingBlock& blk, const RepeatPattern& pattern, int instances) {
    if (instances < 1) throw std::invalid_argument("repeat: need at least one instance");
    if (pattern.kind == RepeatPattern::Kind::Explicit &&
        static_cast<int>(pattern.starts.size()) < instances)
        throw std::invalid_argument("repeat: explicit pattern has too few starts");

    RepeatResult res;
    GridSchedule& sched = res.schedule;
    sched.topology = blk.topology;
    sched.microbatches = instances * blk.microbatches_per_block;
    sched.passes.reserve(blk.passes.size() * instances);
    for (int j = 0; j < instances; ++j) {
        long long base = pattern.kind == RepeatPattern::Kind::Uniform
                             ? j * blk.interval
                             : pattern.starts[j];
        for (const auto& p : blk.passes) {
            GridPass gp;
            gp.device = blk.topology.device_of(p.stage);
            gp.stage = p.stage;
            gp.kind = p.kind;
            gp.microbatch = j * blk.microbatches_per_block + p.microbatch;
            gp.start = base + p.offset;
            gp.duration = pass_width(p.kind);
            sched.passes.push_back(gp);
        }
    }

    std::map<std::pair<int, long long>, size_t> cells;
    std::optional<GridCollision> best;
    for (size_t i = 0; i < sched.passes.size(); ++i) {
        const auto& p = sched.passes[i];
        for (long long c = p.start; c < p.end(); ++c) {
            auto [it, fresh] = cells.insert({{p.device, c}, i});
            if (!fresh) {
                GridCollision col{p.device, c, sched.passes[it->second], p};
                if (!best || std::tie(col.device, col.cell) < std::tie(best->device, best->cell))
                    best = col;
            }
        }
    }
    res.collision = best;
    detail::sort_canonical(sched);
    return res;
}

// Schedule-level checks: per-device overlaps (first in device-major order),
// dependency completeness and ordering.
template <typename Dur>
struct ScheduleReport {
    std::vector<std::string> problems;
    bool ok() const { return problems.empty(); }
};

template <typename Dur>
ScheduleReport<Dur> validate_schedule(const ScheduleT<Dur>& sched) {
    ScheduleReport<Dur> rep;
    std::vector<std::vector<const ScheduledPassT<Dur>*>> by_dev(sched.topology.devices + 1);
    for (const auto& p : sched.passes) {
        if (p.device < 1 || p.device > sched.topology.devices) {
            rep.problems.push_back("device out of range: " + std::to_string(p.device));
            continue;
        }
        if (p.device != sched.topology.device_of(p.stage))
            rep.problems.push_back("stage " + std::to_string(p.stage) + " not placed on device " +
                                   std::to_string(p.device));
        by_dev[p.device].push_back(&p);
    }
    for (int dev = 1; dev <= sched.topology.devices; ++dev) {
        auto& v = by_dev[dev];
        std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->start < b->start; });
        for (size_t i = 1; i < v.size(); ++i)
            if (v[i]->start < v[i - 1]->end())
                rep.problems.push_back("device " + std::to_string(dev) + " overlap at " +
                                       std::to_string(static_cast<double>(v[i]->start)));
    }
    detail::PassIndex<Dur> index(sched);
    for (const auto& p : sched.passes) {
        std::vector<PassRef> deps;
        try {
            deps = dependencies_of(sched.topology, {p.stage, p.kind, p.microbatch});
        } catch (const std::invalid_argument& e) {
            rep.problems.push_back(e.what());
            continue;
        }
        for (const auto& dep : deps) {
            auto di = index.find(dep.stage, dep.kind, dep.microbatch);
            if (!di) {
                rep.problems.push_back("microbatch " + std::to_string(p.microbatch) + " misses " +
                                       pass_name(dep.kind) + " of stage " +
                                       std::to_string(dep.stage));
            } else if (sched.passes[*di].end() > p.start) {
                rep.problems.push_back(pass_name(p.kind) + "(stage " + std::to_string(p.stage) +
                                       ", microbatch " + std::to_string(p.microbatch) +
                                       ") starts before its prerequisite ends");
            }
        }
    }
    return rep;
}

// Earliest-start compaction that preserves each device's pass order. Grid
// start order is a valid processing order: prerequisites and same-device
// predecessors always start strictly earlier.
inline GridSchedule squeeze(const GridSchedule& sched) {
    GridSchedule out = sched;
    std::vector<size_t> order(out.passes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const auto& pa = out.passes[a];
        const auto& pb = out.passes[b];
        return std::tie(pa.start, pa.device, pa.stage, pa.microbatch) <
               std::tie(pb.start, pb.device, pb.stage, pb.microbatch);
    });
    detail::PassIndex<long long> index(out);
    std::vector<long long> new_start(out.passes.size(), 0);
    std::vector<char> placed(out.passes.size(), 0);
    std::vector<long long> dev_free(out.topology.devices + 1, 0);
    for (size_t oi : order) {
        const auto& p = out.passes[oi];
        long long at = dev_free[p.device];
        for (size_t di : index.dep_indices(p)) {
            if (!placed[di]) throw std::invalid_argument("squeeze: prerequisite not ordered first");
            at = std::max(at, new_start[di] + out.passes[di].duration);
        }
        new_start[oi] = at;
        placed[oi] = 1;
        dev_free[p.device] = at + p.duration;
    }
    for (size_t i = 0; i < out.passes.size(); ++i) out.passes[i].start = new_start[i];
    detail::sort_canonical(out);
    return out;
}

namespace detail {

struct DevView {
    std::vector<size_t> idx;  // pass indices sorted by start
};

template <typename Dur>
std::vector<DevView> device_views(const ScheduleT<Dur>& sched) {
    std::vector<DevView> v(sched.topology.devices + 1);
    for (size_t i = 0; i < sched.passes.size(); ++i) v[sched.passes[i].device].idx.push_back(i);
    for (auto& dv : v)
        std::sort(dv.idx.begin(), dv.idx.end(), [&](size_t a, size_t b) {
            return sched.passes[a].start < sched.passes[b].start;
        });
    return v;
}

// peak of one device if pass `moved` started at `at` instead
inline double device_peak_with(const GridSchedule& sched, const std::vector<size_t>& dev_passes,
                               size_t moved, long long at) {
    struct Ev {
        long long t;
        int order;
        double d;
    };
    std::vector<Ev> evs;
    for (size_t i : dev_passes) {
        const auto& p = sched.passes[i];
        long long start = i == moved ? at : p.start;
        double m = sched.topology.mem_of(p.stage);
        if (p.kind == PassKind::F) evs.push_back({start, 1, m});
        if (p.kind == PassKind::W || p.kind == PassKind::BW)
            evs.push_back({start + p.duration, 0, -m});
    }
    std::sort(evs.begin(), evs.end(),
              [](const Ev& a, const Ev& b) { return std::tie(a.t, a.order) < std::tie(b.t, b.order); });
    double cur = 0, peak = 0;
    for (const auto& e : evs) {
        cur += e.d;
        peak = std::max(peak, cur);
    }
    return peak;
}

}  // namespace detail

// Warm-up and cool-down cleanup. Idle warm-up cells are filled by sliding
// later passes of the same device forward when prerequisites allow and the
// device's pre-reorder memory peak is not exceeded; cool-down W passes are
// recycled into the holes their removal opens up. Makespan and per-device
// peaks never increase.
inline GridSchedule reorder(const GridSchedule& input) {
    GridSchedule sched = input;
    auto pre_peak = exact_peak(sched).per_device;

    // prerequisite index lists depend on pass identity only, never on starts
    detail::PassIndex<long long> index(sched);
    std::vector<std::vector<size_t>> deps(sched.passes.size());
    for (size_t i = 0; i < sched.passes.size(); ++i) deps[i] = index.dep_indices(sched.passes[i]);
    auto ready_at = [&](size_t i) {
        long long e = 0;
        for (size_t di : deps[i]) e = std::max(e, sched.passes[di].end());
        return e;
    };

    // fill idle cells by moving later passes of the same device forward; one
    // sweep applies every fill it sees, and sweeps repeat because each move
    // can unblock more (every move is strictly earlier, so this terminates)
    bool moved = true;
    while (moved) {
        moved = false;
        auto views = detail::device_views(sched);
        for (int dev = 1; dev <= sched.topology.devices; ++dev) {
            auto& dv = views[dev].idx;
            std::vector<char> relocated(dv.size(), 0);
            std::vector<long long> floor_at(dv.size(), 0);  // cells vetoed by the peak cap
            long long cursor = 0;
            for (size_t vi = 0; vi < dv.size(); ++vi) {
                if (relocated[vi]) continue;
                long long gap_end = sched.passes[dv[vi]].start;
                while (cursor < gap_end) {
                    // earliest fitting cell wins; ties go to the earlier pass
                    size_t pick = dv.size();
                    long long pick_at = 0;
                    for (size_t vj = vi; vj < dv.size(); ++vj) {
                        if (relocated[vj]) continue;
                        const auto& cand = sched.passes[dv[vj]];
                        long long at = std::max({cursor, ready_at(dv[vj]), floor_at[vj]});
                        if (at + cand.duration > gap_end) continue;
                        if (pick == dv.size() || at < pick_at) {
                            pick = vj;
                            pick_at = at;
                        }
                    }
                    if (pick == dv.size()) break;
                    auto& cand = sched.passes[dv[pick]];
                    if (cand.kind == PassKind::F &&
                        detail::device_peak_with(sched, dv, dv[pick], pick_at) >
                            pre_peak[dev - 1] + 1e-9) {
                        floor_at[pick] = pick_at + 1;
                        continue;
                    }
                    cand.start = pick_at;
                    relocated[pick] = 1;
                    moved = true;
                    cursor = pick_at + cand.duration;
                }
                cursor = std::max(cursor, sched.passes[dv[vi]].end());
            }
        }
    }

    // recycle cool-down W passes: pull everything else forward, then refill
    std::vector<long long> last_f(sched.topology.devices + 1, -1);
    for (const auto& p : sched.passes)
        if (p.kind == PassKind::F) last_f[p.device] = std::max(last_f[p.device], p.end());
    GridSchedule kept;
    kept.topology = sched.topology;
    kept.microbatches = sched.microbatches;
    std::vector<GridPass> recycled;
    for (const auto& p : sched.passes) {
        if (p.kind == PassKind::W && last_f[p.device] >= 0 && p.start >= last_f[p.device])
            recycled.push_back(p);
        else
            kept.passes.push_back(p);
    }
    if (recycled.empty()) {
        detail::sort_canonical(sched);
        return sched;
    }
    GridSchedule packed = squeeze(kept);
    detail::PassIndex<long long> pidx(packed);
    struct Pending {
        GridPass w;
        long long b_end;
    };
    std::vector<std::vector<Pending>> pending(packed.topology.devices + 1);
    for (const auto& w : recycled) {
        auto bi = pidx.find(w.stage, PassKind::B, w.microbatch);
        if (!bi) throw std::invalid_argument("reorder: W without matching B");
        pending[w.device].push_back({w, packed.passes[*bi].end()});
    }
    auto views = detail::device_views(packed);
    std::vector<GridPass> placed_ws;
    for (int dev = 1; dev <= packed.topology.devices; ++dev) {
        auto& ps = pending[dev];
        std::sort(ps.begin(), ps.end(), [](const Pending& a, const Pending& b) {
            return std::tie(a.b_end, a.w.microbatch) < std::tie(b.b_end, b.w.microbatch);
        });
        size_t next = 0;
        long long cursor = 0;
        long long dev_end = 0;
        for (size_t i : views[dev].idx) {
            const auto& p = packed.passes[i];
            while (next < ps.size() && cursor < p.start) {
                if (ps[next].b_end <= cursor) {
                    GridPass w = ps[next].w;
                    w.start = cursor;
                    placed_ws.push_back(w);
                    ++next;
                    ++cursor;
                } else {
                    ++cursor;
                }
            }
            cursor = std::max(cursor, p.end());
            dev_end = std::max(dev_end, p.end());
        }
        cursor = std::max(cursor, dev_end);
        for (; next < ps.size(); ++next) {
            GridPass w = ps[next].w;
            w.start = std::max(cursor, ps[next].b_end);
            cursor = w.start + 1;
            placed_ws.push_back(w);
        }
    }
    for (const auto& w : placed_ws) packed.passes.push_back(w);
    detail::sort_canonical(packed);
    return packed;
}

struct AssembleOptions {
    bool do_squeeze = true;
    bool do_reorder = true;
};

// repeat + squeeze + reorder for n total microbatches
template <typename Build>
GridSchedule assemble(const Build& build, int n, AssembleOptions opts = {}) {
    const BuildingBlock& blk = build.block;
    if (n < 1) throw std::invalid_argument("assemble: need at least one microbatch");
    if (n % blk.microbatches_per_block != 0)
        throw std::invalid_argument("assemble: microbatch count must be a multiple of " +
                                    std::to_string(blk.microbatches_per_block));
    int instances = n / blk.microbatches_per_block;
    RepeatResult rep = repeat(blk, build.pattern_for(instances), instances);
    if (!rep.ok()) throw std::invalid_argument("assemble: " + rep.collision->str());
    GridSchedule sched = std::move(rep.schedule);
    if (opts.do_squeeze) sched = squeeze(sched);
    if (opts.do_reorder) sched = reorder(sched);
    return sched;
}

// Steady-phase translation check: each pass of microbatch group j + mpb
// starts exactly `interval` after its counterpart in group j.
inline bool steady_translates(const GridSchedule& sched, long long interval, int mpb, int mb_lo,
                              int mb_hi) {
    std::map<std::tuple<int, int, int>, long long> starts;
    for (const auto& p : sched.passes)
        starts[{p.stage, static_cast<int>(p.kind), p.microbatch}] = p.start;
    for (const auto& [key, start] : starts) {
        auto [stage, kind, mb] = key;
        if (mb < mb_lo || mb + mpb >= mb_hi) continue;
        auto it = starts.find({stage, kind, mb + mpb});
        if (it == starts.end() || it->second != start + interval) return false;
    }
    return true;
}

}  // namespace pipeblock
