#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pipeblock {

// Passes on the design grid. F/B/W occupy one cell, a fused BW occupies two.
enum class PassKind : uint8_t { F, B, W, BW };

inline int pass_width(PassKind k) { return k == PassKind::BW ? 2 : 1; }

inline char pass_letter(PassKind k) {
    switch (k) {
        case PassKind::F: return 'F';
        case PassKind::B: return 'B';
        case PassKind::W: return 'W';
        case PassKind::BW: return 'D';
    }
    return '?';
}

inline std::string pass_name(PassKind k) {
    switch (k) {
        case PassKind::F: return "F";
        case PassKind::B: return "B";
        case PassKind::W: return "W";
        case PassKind::BW: return "BW";
    }
    return "?";
}

inline std::optional<PassKind> pass_from_name(const std::string& s) {
    if (s == "F") return PassKind::F;
    if (s == "B") return PassKind::B;
    if (s == "W") return PassKind::W;
    if (s == "BW") return PassKind::BW;
    return std::nullopt;
}

// Stages are 1-based; devices are 1-based. A route is the ordered stage list
// one microbatch travels; most pipelines have a single route [1..num_stages],
// bidirectional twins (gems, chimera) have one route per replica.
struct Topology {
    int devices = 0;
    int num_stages = 0;
    std::vector<int> placement;       // placement[s-1] = device of stage s
    std::vector<double> stage_mem;    // activation units held by stage s, in m
    std::vector<std::vector<int>> routes;

    int device_of(int stage) const { return placement.at(stage - 1); }
    double mem_of(int stage) const { return stage_mem.at(stage - 1); }

    const std::vector<int>& route_for(int microbatch) const {
        return routes[static_cast<size_t>(microbatch) % routes.size()];
    }

    bool operator==(const Topology&) const = default;

    // straight pipeline: stage i on device i
    static Topology straight(int d) {
        Topology t;
        t.devices = d;
        t.num_stages = d;
        t.placement.resize(d);
        for (int i = 1; i <= d; ++i) t.placement[i - 1] = i;
        t.stage_mem.assign(d, 1.0);
        t.routes = {iota_route(1, d)};
        return t;
    }

    // v shape: 2d stages, stage i on device i, stage d+i on device d+1-i
    static Topology v_shape(int d) {
        Topology t;
        t.devices = d;
        t.num_stages = 2 * d;
        t.placement.resize(2 * d);
        for (int i = 1; i <= d; ++i) {
            t.placement[i - 1] = i;
            t.placement[d + i - 1] = d + 1 - i;
        }
        t.stage_mem.assign(2 * d, 1.0);
        t.routes = {iota_route(1, 2 * d)};
        return t;
    }

    // two replicas of a d-stage pipeline, the second one upside down
    static Topology twin(int d) {
        Topology t;
        t.devices = d;
        t.num_stages = 2 * d;
        t.placement.resize(2 * d);
        for (int i = 1; i <= d; ++i) {
            t.placement[i - 1] = i;
            t.placement[d + i - 1] = d + 1 - i;
        }
        t.stage_mem.assign(2 * d, 1.0);
        t.routes = {iota_route(1, d), iota_route(d + 1, 2 * d)};
        return t;
    }

    // round-robin interleaving with v virtual stages per device
    static Topology looped(int d, int v) {
        Topology t;
        t.devices = d;
        t.num_stages = d * v;
        t.placement.resize(d * v);
        for (int s = 1; s <= d * v; ++s) t.placement[s - 1] = (s - 1) % d + 1;
        t.stage_mem.assign(d * v, 1.0);
        t.routes = {iota_route(1, d * v)};
        return t;
    }

    static std::vector<int> iota_route(int lo, int hi) {
        std::vector<int> r;
        for (int s = lo; s <= hi; ++s) r.push_back(s);
        return r;
    }
};

// One pass inside a building block. microbatch is the slot index within the
// block, in [0, microbatches_per_block).
struct BlockPass {
    int stage = 0;
    PassKind kind = PassKind::F;
    int microbatch = 0;
    long long offset = 0;

    bool operator==(const BlockPass&) const = default;
};

struct BuildingBlock {
    Topology topology;
    long long interval = 0;           // repeat period T in cells
    int microbatches_per_block = 1;
    std::vector<BlockPass> passes;
};

// How block instances are laid out in time.
struct RepeatPattern {
    enum class Kind { Uniform, Explicit };
    Kind kind = Kind::Uniform;
    std::vector<long long> starts;    // explicit instance starts, else empty

    static RepeatPattern uniform() { return {}; }
    static RepeatPattern explicit_starts(std::vector<long long> s) {
        RepeatPattern p;
        p.kind = Kind::Explicit;
        p.starts = std::move(s);
        return p;
    }
};

// A concrete pass of a full schedule. Durations are in cells on the design
// grid and in profiled time units after simulation.
template <typename Dur>
struct ScheduledPassT {
    int device = 0;
    int stage = 0;
    PassKind kind = PassKind::F;
    int microbatch = 0;
    Dur start{};
    Dur duration{};

    Dur end() const { return start + duration; }
    bool operator==(const ScheduledPassT&) const = default;
};

using GridPass = ScheduledPassT<long long>;
using TimedPass = ScheduledPassT<double>;

template <typename Dur>
struct ScheduleT {
    Topology topology;
    int microbatches = 0;
    std::vector<ScheduledPassT<Dur>> passes;
};

using GridSchedule = ScheduleT<long long>;
using TimedSchedule = ScheduleT<double>;

// Measured per-pass durations plus a per-hop communication latency.
struct RunTimeProfile {
    double f = 1.0;
    double b = 1.0;
    double w = 1.0;
    double comm = 0.0;

    double of(PassKind k) const {
        switch (k) {
            case PassKind::F: return f;
            case PassKind::B: return b;
            case PassKind::W: return w;
            case PassKind::BW: return b + w;
        }
        return 0.0;
    }

    static RunTimeProfile unit() { return {1.0, 1.0, 1.0, 0.0}; }
};

struct PassRef {
    int stage = 0;
    PassKind kind = PassKind::F;
    int microbatch = 0;

    bool operator==(const PassRef&) const = default;
};

// Prerequisites of one pass under the route semantics. B of the last route
// stage turns around on F of the same stage; W always follows its own B.
// Backward passes may resolve against either split B or fused BW upstream,
// so the B/BW alternative is reported as kind B and callers try both.
inline std::vector<PassRef> dependencies_of(const Topology& topo, const PassRef& p) {
    const auto& route = topo.route_for(p.microbatch);
    auto pos = std::find(route.begin(), route.end(), p.stage);
    if (pos == route.end()) throw std::invalid_argument("stage not on this microbatch's route");
    size_t idx = static_cast<size_t>(pos - route.begin());
    std::vector<PassRef> deps;
    switch (p.kind) {
        case PassKind::F:
            if (idx > 0) deps.push_back({route[idx - 1], PassKind::F, p.microbatch});
            break;
        case PassKind::B:
        case PassKind::BW:
            deps.push_back({p.stage, PassKind::F, p.microbatch});
            if (idx + 1 < route.size()) deps.push_back({route[idx + 1], p.kind, p.microbatch});
            break;
        case PassKind::W:
            deps.push_back({p.stage, PassKind::B, p.microbatch});
            break;
    }
    return deps;
}

struct BlockViolation {
    enum class Type { Collision, Dependency, Shape };
    Type type = Type::Shape;
    std::string detail;
    int device = 0;          // collisions: where
    long long cell = -1;     // collisions: which cell
};

struct BlockReport {
    std::vector<BlockViolation> violations;
    bool ok() const { return violations.empty(); }
};

namespace detail {

struct PassKey {
    int stage;
    int kind;
    int microbatch;
    bool operator<(const PassKey& o) const {
        return std::tie(stage, kind, microbatch) < std::tie(o.stage, o.kind, o.microbatch);
    }
};

inline std::string block_pass_str(const BlockPass& p) {
    return pass_name(p.kind) + "(stage " + std::to_string(p.stage) + ", mb " +
           std::to_string(p.microbatch) + ")@" + std::to_string(p.offset);
}

}  // namespace detail

// Finds, inside one block instance, the end offset of the pass a dependency
// refers to; split/fused backward resolves to whichever exists.
inline std::optional<long long> block_dep_end(
    const std::map<detail::PassKey, const BlockPass*>& index, const PassRef& dep) {
    auto it = index.find({dep.stage, static_cast<int>(dep.kind), dep.microbatch});
    if (it == index.end() && (dep.kind == PassKind::B || dep.kind == PassKind::BW)) {
        int other = static_cast<int>(dep.kind == PassKind::B ? PassKind::BW : PassKind::B);
        it = index.find({dep.stage, other, dep.microbatch});
    }
    if (it == index.end() && dep.kind == PassKind::B) {
        // W's dep on B resolves to fused BW too
        it = index.find({dep.stage, static_cast<int>(PassKind::BW), dep.microbatch});
    }
    if (it == index.end()) return std::nullopt;
    return it->second->offset + pass_width(it->second->kind);
}

// Structural checks on one block: complete slot coverage along each route,
// split/fused exclusivity, in-range offsets, same-device cell collisions and
// intra-slot dependency order. Returns all violations, never throws on bad
// block content.
inline BlockReport validate_block(const BuildingBlock& blk) {
    BlockReport rep;
    const Topology& topo = blk.topology;

    std::map<detail::PassKey, const BlockPass*> index;
    for (const auto& p : blk.passes) {
        if (p.stage < 1 || p.stage > topo.num_stages) {
            rep.violations.push_back({BlockViolation::Type::Shape,
                                      "stage out of range: " + detail::block_pass_str(p), 0, -1});
            continue;
        }
        if (p.microbatch < 0 || p.microbatch >= blk.microbatches_per_block) {
            rep.violations.push_back({BlockViolation::Type::Shape,
                                      "slot out of range: " + detail::block_pass_str(p), 0, -1});
            continue;
        }
        if (p.offset < 0) {
            rep.violations.push_back({BlockViolation::Type::Shape,
                                      "negative offset: " + detail::block_pass_str(p), 0, -1});
        }
        auto [it, fresh] = index.insert({{p.stage, static_cast<int>(p.kind), p.microbatch}, &p});
        if (!fresh)
            rep.violations.push_back({BlockViolation::Type::Shape,
                                      "duplicate pass: " + detail::block_pass_str(p), 0, -1});
    }

    // every stage of a slot's route needs F plus either fused BW or split B and W
    for (int slot = 0; slot < blk.microbatches_per_block; ++slot) {
        for (int stage : topo.route_for(slot)) {
            auto has = [&](PassKind k) {
                return index.count({stage, static_cast<int>(k), slot}) > 0;
            };
            std::string at = "stage " + std::to_string(stage) + ", slot " + std::to_string(slot);
            if (!has(PassKind::F))
                rep.violations.push_back({BlockViolation::Type::Shape, "missing F at " + at, 0, -1});
            bool fused = has(PassKind::BW), b = has(PassKind::B), w = has(PassKind::W);
            if (fused && (b || w))
                rep.violations.push_back(
                    {BlockViolation::Type::Shape, "fused BW next to split pass at " + at, 0, -1});
            if (!fused && !(b && w))
                rep.violations.push_back(
                    {BlockViolation::Type::Shape, "incomplete backward at " + at, 0, -1});
        }
    }

    // cell collisions within the instance
    std::map<std::pair<int, long long>, const BlockPass*> cells;
    for (const auto& p : blk.passes) {
        if (p.stage < 1 || p.stage > topo.num_stages) continue;
        int dev = topo.device_of(p.stage);
        for (int c = 0; c < pass_width(p.kind); ++c) {
            auto [it, fresh] = cells.insert({{dev, p.offset + c}, &p});
            if (!fresh)
                rep.violations.push_back({BlockViolation::Type::Collision,
                                          detail::block_pass_str(*it->second) + " overlaps " +
                                              detail::block_pass_str(p),
                                          dev, p.offset + c});
        }
    }

    // dependency order within each slot
    for (const auto& p : blk.passes) {
        if (p.stage < 1 || p.stage > topo.num_stages) continue;
        if (p.microbatch < 0 || p.microbatch >= blk.microbatches_per_block) continue;
        for (const auto& dep : dependencies_of(topo, {p.stage, p.kind, p.microbatch})) {
            auto end = block_dep_end(index, dep);
            if (!end) {
                rep.violations.push_back({BlockViolation::Type::Dependency,
                                          "unresolved prerequisite of " + detail::block_pass_str(p),
                                          0, -1});
            } else if (*end > p.offset) {
                rep.violations.push_back({BlockViolation::Type::Dependency,
                                          detail::block_pass_str(p) + " starts before its " +
                                              pass_name(dep.kind) + "(stage " +
                                              std::to_string(dep.stage) + ") ends",
                                          0, -1});
            }
        }
    }

    return rep;
}

// Interval-repeat feasibility: instances translated by multiples of T stay
// collision-free iff each device's cells land on distinct residues mod T.
struct ResidueClash {
    int device = 0;
    long long residue = 0;
    BlockPass a, b;
};

inline std::optional<ResidueClash> find_residue_clash(const BuildingBlock& blk) {
    std::map<std::pair<int, long long>, const BlockPass*> seen;
    for (const auto& p : blk.passes) {
        int dev = blk.topology.device_of(p.stage);
        for (int c = 0; c < pass_width(p.kind); ++c) {
            long long r = (p.offset + c) % blk.interval;
            auto [it, fresh] = seen.insert({{dev, r}, &p});
            if (!fresh) return ResidueClash{dev, r, *it->second, p};
        }
    }
    return std::nullopt;
}

inline bool repeats_collision_free(const BuildingBlock& blk) {
    return !find_residue_clash(blk).has_value();
}

}  // namespace pipeblock
