#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pipeblock/model.hpp"

namespace pipeblock {

// A gallery build: the block itself plus how it likes to be repeated.
// explicit_starts is set only for entries whose instances are not spaced
// uniformly (classic interleaved); everybody else repeats at block.interval.
struct BlockBuild {
    std::string entry;
    BuildingBlock block;
    bool replicated_weights = false;
    std::function<std::vector<long long>(int)> explicit_starts;

    RepeatPattern pattern_for(int instances) const {
        if (!explicit_starts) return RepeatPattern::uniform();
        return RepeatPattern::explicit_starts(explicit_starts(instances));
    }
};

namespace detail {

inline void add_pass(BuildingBlock& blk, int stage, PassKind kind, int slot, long long offset) {
    blk.passes.push_back({stage, kind, slot, offset});
}

inline std::set<std::pair<int, long long>> used_residues(const BuildingBlock& blk) {
    std::set<std::pair<int, long long>> used;
    for (const auto& p : blk.passes) {
        int dev = blk.topology.device_of(p.stage);
        for (int c = 0; c < pass_width(p.kind); ++c)
            used.insert({dev, (p.offset + c) % blk.interval});
    }
    return used;
}

}  // namespace detail

// Places the missing W passes: every (stage, slot) with a split B gets its W
// at the earliest cell at or after the B ends whose residue mod T is still
// free on that device, walking B completions in time order. Returns false
// when some device has no free residue left.
inline bool add_greedy_w(BuildingBlock& blk) {
    auto used = detail::used_residues(blk);
    struct Need {
        long long b_end;
        int stage;
        int slot;
        int device;
    };
    std::vector<Need> needs;
    std::set<std::pair<int, int>> have_w;
    for (const auto& p : blk.passes)
        if (p.kind == PassKind::W) have_w.insert({p.stage, p.microbatch});
    for (const auto& p : blk.passes)
        if (p.kind == PassKind::B && !have_w.count({p.stage, p.microbatch}))
            needs.push_back({p.offset + 1, p.stage, p.microbatch, blk.topology.device_of(p.stage)});
    std::sort(needs.begin(), needs.end(), [](const Need& a, const Need& b) {
        return std::tie(a.b_end, a.stage, a.slot) < std::tie(b.b_end, b.stage, b.slot);
    });
    for (const auto& n : needs) {
        long long cell = n.b_end;
        bool placed = false;
        for (long long tries = 0; tries < blk.interval; ++tries, ++cell) {
            if (!used.count({n.device, cell % blk.interval})) {
                detail::add_pass(blk, n.stage, PassKind::W, n.slot, cell);
                used.insert({n.device, cell % blk.interval});
                placed = true;
                break;
            }
        }
        if (!placed) return false;
    }
    return true;
}

// Chain offsets for v-shaped blocks with split backward. Spacings are per
// chain in time order (F down, F up, B down, B up); turns are the gaps at
// the three direction changes (bottom of F, top at the F-to-B handover,
// bottom of B). W passes fill leftover residues greedily.
struct VOffsets {
    long long delta_f0 = 1;  // F stages 1..d
    long long delta_f1 = 1;  // F stages d+1..2d
    long long delta_b1 = 1;  // B stages 2d..d+1
    long long delta_b0 = 1;  // B stages d..1
    long long tau1 = 1;      // F(d) end to F(d+1) start
    long long tau2 = 1;      // F(2d) end to B(2d) start
    long long tau3 = 1;      // B(d+1) end to B(d) start
};

// Same family with per-edge spacings, used by the adaptive search. Edge j of
// a chain spans devices j and j+1; f_edge drives both F chains' edge at that
// device pair and its mirrored B edge, b_edge likewise for the other pair of
// chains (outer F pairs with outer B under time reversal).
struct VEdgeOffsets {
    std::vector<long long> down_edge;  // size d-1, F0 edge i and B1 edge i
    std::vector<long long> up_edge;    // size d-1, F1 edge k and B0 edge k
    long long tau1 = 1, tau2 = 1, tau3 = 1;
};

inline BuildingBlock make_v_block_edges(int d, const VEdgeOffsets& off, long long interval = 6) {
    BuildingBlock blk;
    blk.topology = Topology::v_shape(d);
    blk.interval = interval;
    blk.microbatches_per_block = 1;

    std::vector<long long> fs(2 * d), bs(2 * d);
    fs[0] = 0;
    for (int i = 2; i <= d; ++i) fs[i - 1] = fs[i - 2] + off.down_edge[i - 2];
    fs[d] = fs[d - 1] + off.tau1;
    for (int k = 2; k <= d; ++k) fs[d + k - 1] = fs[d + k - 2] + off.up_edge[k - 2];
    bs[2 * d - 1] = fs[2 * d - 1] + off.tau2;
    // B edge k of the descending chain spans devices k, k+1
    for (int k = 1; k <= d - 1; ++k) bs[2 * d - k - 1] = bs[2 * d - k] + off.down_edge[k - 1];
    bs[d - 1] = bs[d] + off.tau3;
    for (int l = 1; l <= d - 1; ++l) bs[d - l - 1] = bs[d - l] + off.up_edge[l - 1];

    for (int s = 1; s <= 2 * d; ++s) {
        detail::add_pass(blk, s, PassKind::F, 0, fs[s - 1]);
        detail::add_pass(blk, s, PassKind::B, 0, bs[s - 1]);
    }
    return blk;
}

inline BuildingBlock make_v_block(int d, const VOffsets& off, long long interval = 6) {
    VEdgeOffsets e;
    e.down_edge.assign(std::max(0, d - 1), 0);
    e.up_edge.assign(std::max(0, d - 1), 0);
    for (int j = 0; j < d - 1; ++j) e.down_edge[j] = off.delta_f0;
    for (int j = 0; j < d - 1; ++j) e.up_edge[j] = off.delta_f1;
    e.tau1 = off.tau1;
    e.tau2 = off.tau2;
    e.tau3 = off.tau3;
    BuildingBlock blk;
    // the scalar family allows distinct spacings for mirrored chains
    blk = make_v_block_edges(d, e, interval);
    std::map<int, long long> bstart;
    long long b_head = 0;
    for (const auto& p : blk.passes)
        if (p.kind == PassKind::F && p.stage == 2 * d) b_head = p.offset + 1 + off.tau2 - 1;
    // rebuild B chain with its own spacings
    std::vector<long long> bs(2 * d);
    bs[2 * d - 1] = b_head;
    for (int k = 1; k <= d - 1; ++k) bs[2 * d - k - 1] = bs[2 * d - k] + off.delta_b1;
    bs[d - 1] = bs[d] + off.tau3;
    for (int l = 1; l <= d - 1; ++l) bs[d - l - 1] = bs[d - l] + off.delta_b0;
    for (auto& p : blk.passes)
        if (p.kind == PassKind::B) p.offset = bs[p.stage - 1];
    return blk;
}

inline BuildingBlock finish_v_block(BuildingBlock blk, const char* entry) {
    if (!add_greedy_w(blk))
        throw std::invalid_argument(std::string(entry) + ": no free residue left for W");
    auto rep = validate_block(blk);
    if (!rep.ok())
        throw std::invalid_argument(std::string(entry) + ": " + rep.violations.front().detail);
    if (auto clash = find_residue_clash(blk))
        throw std::invalid_argument(std::string(entry) + ": repeat clash on device " +
                                    std::to_string(clash->device));
    return blk;
}

// ---- gallery entries ----

namespace gallery_detail {

inline BuildingBlock one_f_one_b(int d) {
    BuildingBlock blk;
    blk.topology = Topology::straight(d);
    blk.interval = 3;
    for (int i = 1; i <= d; ++i) {
        detail::add_pass(blk, i, PassKind::F, 0, i - 1);
        detail::add_pass(blk, i, PassKind::BW, 0, 3LL * d - 2 * i);
    }
    return blk;
}

// eagerness k in [0, d-1] forward passes admitted beyond the minimum;
// the backward head sits at d + 3k so residues stay in the 1f1b pattern
inline BuildingBlock eager_one_f_one_b(int d, long long k) {
    if (k < 0 || k > d - 1) throw std::invalid_argument("eager-1f1b: eagerness must be in [0, d-1]");
    BuildingBlock blk;
    blk.topology = Topology::straight(d);
    blk.interval = 3;
    long long x = d + 3 * k;
    for (int i = 1; i <= d; ++i) {
        detail::add_pass(blk, i, PassKind::F, 0, i - 1);
        detail::add_pass(blk, i, PassKind::BW, 0, x + 2LL * (d - i));
    }
    return blk;
}

// all-forward-then-all-backward for up to `horizon` microbatches
inline BuildingBlock gpipe(int d, long long horizon) {
    if (horizon < 1) throw std::invalid_argument("gpipe: horizon must be positive");
    BuildingBlock blk;
    blk.topology = Topology::straight(d);
    blk.interval = 3;
    long long x = d + 3 * (horizon - 1);
    for (int i = 1; i <= d; ++i) {
        detail::add_pass(blk, i, PassKind::F, 0, i - 1);
        detail::add_pass(blk, i, PassKind::BW, 0, x + 2LL * (d - i));
    }
    return blk;
}

inline BuildingBlock zb_h1(int d) {
    BuildingBlock blk;
    blk.topology = Topology::straight(d);
    blk.interval = 3;
    for (int i = 1; i <= d; ++i) {
        detail::add_pass(blk, i, PassKind::F, 0, i - 1);
        detail::add_pass(blk, i, PassKind::B, 0, 3LL * d - 2 * i);
        detail::add_pass(blk, i, PassKind::W, 0, 3LL * d - 2 * i + 1);
    }
    return blk;
}

// backward head delayed to 4d so warm-up forwards fill the grid
inline BuildingBlock zb_h2(int d) {
    BuildingBlock blk;
    blk.topology = Topology::straight(d);
    blk.interval = 3;
    long long x = 4LL * d;
    for (int i = 1; i <= d; ++i) {
        detail::add_pass(blk, i, PassKind::F, 0, i - 1);
        detail::add_pass(blk, i, PassKind::B, 0, x + 2LL * (d - i));
        detail::add_pass(blk, i, PassKind::W, 0, x + 2LL * (d - i) + 1);
    }
    return blk;
}

// two microbatches per block so the spacing-1 backward chains dodge each
// other; per-stage footprint lands near two thirds of 1f1b's
inline BuildingBlock zb_2_3(int d) {
    BuildingBlock blk;
    blk.topology = Topology::straight(d);
    blk.interval = 6;
    blk.microbatches_per_block = 2;
    for (int i = 1; i <= d; ++i) {
        detail::add_pass(blk, i, PassKind::F, 0, i - 1);
        detail::add_pass(blk, i, PassKind::B, 0, 2LL * d - i);
        detail::add_pass(blk, i, PassKind::F, 1, i + 1);
        detail::add_pass(blk, i, PassKind::B, 1, 2LL * d + 2 - i);
    }
    if (!add_greedy_w(blk)) throw std::invalid_argument("zb-2-3: W placement failed");
    return blk;
}

// first replica in 1f1b shape, second squeezed in greedily cell by cell,
// then the repeat interval is the smallest collision-free one
inline BuildingBlock gems(int d) {
    BuildingBlock blk;
    blk.topology = Topology::twin(d);
    blk.microbatches_per_block = 2;
    std::set<std::pair<int, long long>> cells;
    auto occupy = [&](int stage, PassKind k, int slot, long long at) {
        detail::add_pass(blk, stage, k, slot, at);
        for (int c = 0; c < pass_width(k); ++c) cells.insert({blk.topology.device_of(stage), at + c});
    };
    for (int i = 1; i <= d; ++i) {
        occupy(i, PassKind::F, 0, i - 1);
        occupy(i, PassKind::BW, 0, d + 2LL * (d - i));
    }
    auto greedy = [&](int stage, PassKind k, long long ready) {
        int dev = blk.topology.device_of(stage);
        long long at = ready;
        for (;;) {
            bool free = true;
            for (int c = 0; c < pass_width(k); ++c)
                if (cells.count({dev, at + c})) free = false;
            if (free) break;
            ++at;
        }
        occupy(stage, k, 1, at);
        return at + pass_width(k);
    };
    long long ready = 0;
    for (int s = d + 1; s <= 2 * d; ++s) ready = greedy(s, PassKind::F, ready);
    std::map<int, long long> fend;
    for (const auto& p : blk.passes)
        if (p.microbatch == 1 && p.kind == PassKind::F) fend[p.stage] = p.offset + 1;
    ready = fend[2 * d];
    for (int s = 2 * d; s >= d + 1; --s) ready = greedy(s, PassKind::BW, std::max(ready, fend[s]));

    long long span = 0;
    for (const auto& p : blk.passes) span = std::max(span, p.offset + pass_width(p.kind));
    for (long long t = 6;; ++t) {
        blk.interval = t;
        if (repeats_collision_free(blk)) break;
        if (t > span + 2) throw std::invalid_argument("gems: no repeat interval found");
    }
    return blk;
}

// two mirrored half-pipelines; needs an even device count or the middle
// device would run both directions' forward in the same cell
inline BuildingBlock chimera(int d) {
    if (d % 2 != 0) throw std::invalid_argument("chimera: device count must be even");
    BuildingBlock blk;
    blk.topology = Topology::twin(d);
    blk.microbatches_per_block = 2;
    for (int i = 1; i <= d; ++i) {
        detail::add_pass(blk, i, PassKind::F, 0, i - 1);
        detail::add_pass(blk, i, PassKind::BW, 0, d + 2LL * (d - i));
    }
    for (int k = 1; k <= d; ++k) {
        detail::add_pass(blk, d + k, PassKind::F, 1, k - 1);
        detail::add_pass(blk, d + k, PassKind::BW, 1, d + 2LL * (d - k));
    }
    long long span = 3LL * d;
    for (long long t = 6;; ++t) {
        blk.interval = t;
        if (repeats_collision_free(blk)) break;
        if (t > span + 2) throw std::invalid_argument("chimera: no repeat interval found");
    }
    return blk;
}

// classic depth-2 interleaving; instances are not equally spaced (gap 3
// inside a round of d, then a jump to the next round), so the entry carries
// an explicit start pattern
inline BlockBuild interleaved_one_f_one_b(int d) {
    BlockBuild b;
    b.entry = "interleaved-1f1b";
    BuildingBlock& blk = b.block;
    blk.topology = Topology::looped(d, 2);
    blk.interval = 6LL * d;
    for (int i = 1; i <= d; ++i) {
        detail::add_pass(blk, i, PassKind::F, 0, i - 1);
        detail::add_pass(blk, d + i, PassKind::F, 0, 3LL * d + i - 1);
        detail::add_pass(blk, d + i, PassKind::BW, 0, 6LL * d - 2 * i);
        detail::add_pass(blk, i, PassKind::BW, 0, 9LL * d - 2 * i);
    }
    long long dd = d;
    b.explicit_starts = [dd](int n) {
        std::vector<long long> starts(n);
        for (int j = 0; j < n; ++j) starts[j] = 6 * dd * (j / dd) + 3 * (j % dd);
        return starts;
    };
    return b;
}

// uniform-interval interleaving: second-chunk forward must sit at 3 mod 6
// and the two backward heads in residue classes 0 and 3 (any order)
inline BuildingBlock interleaved_uniform_at(int d, long long f2) {
    BuildingBlock blk;
    blk.topology = Topology::looped(d, 2);
    blk.interval = 6;
    long long y = f2 + d;
    while ((y + 2LL * d) % 6 != 0 && (y + 2LL * d) % 6 != 3) ++y;
    long long want_z = 3 - (y + 2LL * d) % 6;
    if (want_z < 0) want_z += 6;
    long long z = y + 2LL * d;
    while ((z + 2LL * d) % 6 != want_z) ++z;
    for (int i = 1; i <= d; ++i) {
        detail::add_pass(blk, i, PassKind::F, 0, i - 1);
        detail::add_pass(blk, d + i, PassKind::F, 0, f2 + i - 1);
        detail::add_pass(blk, d + i, PassKind::BW, 0, y + 2LL * (d - i));
        detail::add_pass(blk, i, PassKind::BW, 0, z + 2LL * (d - i));
    }
    return blk;
}

inline BuildingBlock interleaved_uniform(int d) {
    // mirror the classic schedule's second-chunk position near 3d
    long long f2 = 3LL * d;
    while (f2 % 6 != 3) ++f2;
    return interleaved_uniform_at(d, f2);
}

inline BuildingBlock interleaved_low_mem(int d) {
    long long f2 = d;
    while (f2 % 6 != 3) ++f2;
    return interleaved_uniform_at(d, f2);
}

// v shape with fused backward; no tight chain solves the residues for d >= 3,
// so take the first valid offset tuple in a small deterministic search that
// prefers short lifespans
inline BuildingBlock one_f_one_b_v(int d) {
    struct Cand {
        long long sum;
        VOffsets off;
    };
    std::vector<Cand> cands;
    for (long long a = 1; a <= 4; ++a)
        for (long long b = 1; b <= 4; ++b)
            for (long long c = 2; c <= 5; ++c)
                for (long long e = 2; e <= 5; ++e)
                    for (long long t1 = 1; t1 <= 6; ++t1)
                        for (long long t2 = 1; t2 <= 6; ++t2)
                            for (long long t3 = 2; t3 <= 7; ++t3)
                                cands.push_back({a + b + c + e + t1 + t2 + t3,
                                                 {a, b, c, e, t1, t2, t3}});
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
        return std::tie(x.sum, x.off.delta_f0, x.off.delta_f1, x.off.delta_b1, x.off.delta_b0,
                        x.off.tau1, x.off.tau2, x.off.tau3) <
               std::tie(y.sum, y.off.delta_f0, y.off.delta_f1, y.off.delta_b1, y.off.delta_b0,
                        y.off.tau1, y.off.tau2, y.off.tau3);
    });
    for (const auto& cand : cands) {
        BuildingBlock blk;
        blk.topology = Topology::v_shape(d);
        blk.interval = 6;
        std::vector<long long> fs(2 * d), bs(2 * d);
        for (int i = 1; i <= d; ++i) fs[i - 1] = (i - 1) * cand.off.delta_f0;
        fs[d] = fs[d - 1] + cand.off.tau1;
        for (int k = 2; k <= d; ++k) fs[d + k - 1] = fs[d + k - 2] + cand.off.delta_f1;
        bs[2 * d - 1] = fs[2 * d - 1] + cand.off.tau2;
        for (int k = 1; k <= d - 1; ++k) bs[2 * d - k - 1] = bs[2 * d - k] + cand.off.delta_b1;
        bs[d - 1] = bs[d] + cand.off.tau3;
        for (int l = 1; l <= d - 1; ++l) bs[d - l - 1] = bs[d - l] + cand.off.delta_b0;
        for (int s = 1; s <= 2 * d; ++s) {
            detail::add_pass(blk, s, PassKind::F, 0, fs[s - 1]);
            detail::add_pass(blk, s, PassKind::BW, 0, bs[s - 1]);
        }
        if (!repeats_collision_free(blk)) continue;
        if (!validate_block(blk).ok()) continue;
        return blk;
    }
    throw std::invalid_argument("1f1b-v: no valid offsets in search range");
}

inline BuildingBlock v_min(int d) {
    VOffsets off;
    off.delta_f0 = off.delta_f1 = off.delta_b1 = off.delta_b0 = 1;
    off.tau1 = 1;
    off.tau2 = (d % 3 == 0) ? 3 : 1;
    off.tau3 = 1;
    return finish_v_block(make_v_block(d, off), "v-min");
}

inline BuildingBlock v_half(int d) {
    VOffsets off;
    off.delta_f0 = 2;
    off.delta_f1 = 1;
    off.delta_b1 = 2;
    off.delta_b0 = 1;
    off.tau1 = 2;
    off.tau2 = (d % 2 == 0) ? 4 : 1;
    off.tau3 = 1;
    return finish_v_block(make_v_block(d, off), "v-half");
}

inline BuildingBlock v_zb(int d) {
    VOffsets off;
    off.delta_f0 = 4;
    off.delta_f1 = 2;
    off.delta_b1 = 4;
    off.delta_b0 = 2;
    off.tau1 = 1;
    off.tau2 = 1;
    off.tau3 = 1;
    return finish_v_block(make_v_block(d, off), "v-zb");
}

}  // namespace gallery_detail

struct GalleryInfo {
    std::string name;
    std::string summary;
    std::string validity;  // human note on supported device counts
};

inline const std::vector<GalleryInfo>& gallery() {
    static const std::vector<GalleryInfo> entries = {
        {"1f1b", "one forward, one fused backward in flight per device", "d >= 1"},
        {"eager-1f1b", "1f1b with extra forwards admitted early (param eagerness, default d-1)",
         "d >= 1"},
        {"gpipe", "all forwards, then all backwards (param horizon, default 4d)", "d >= 1"},
        {"gems", "two weight replicas, second squeezed into the first's gaps", "d >= 1"},
        {"chimera", "two mirrored half-pipelines with replicated weights", "even d >= 2"},
        {"interleaved-1f1b", "depth-2 round-robin interleaving, classic non-uniform spacing",
         "d >= 2"},
        {"interleaved-1f1b-uniform", "depth-2 interleaving forced onto a uniform interval",
         "d >= 2"},
        {"interleaved-low-mem", "uniform interleaving with the earliest legal second chunk",
         "d >= 2"},
        {"zb-h1", "split backward, same footprint as 1f1b", "d >= 1"},
        {"zb-h2", "split backward with delayed heads, zero steady bubble", "d >= 1"},
        {"1f1b-v", "v-shaped placement with fused backward", "d >= 2"},
        {"zb-2-3", "split backward at spacing 1, two microbatches per block", "d >= 1"},
        {"v-min", "v shape, tightest chains, half of 1f1b's footprint", "d >= 2"},
        {"v-half", "v shape tuned to three quarters of the baseline footprint", "d >= 2"},
        {"v-zb", "v shape with zero steady bubble at the full footprint", "d >= 2"},
    };
    return entries;
}

inline BlockBuild build_entry(const std::string& name, int d,
                              const std::map<std::string, long long>& params = {}) {
    if (d < 1) throw std::invalid_argument("device count must be positive");
    auto param = [&](const char* key, long long fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    for (const auto& [key, value] : params) {
        (void)value;
        if (key != "eagerness" && key != "horizon")
            throw std::invalid_argument("unknown parameter: " + key);
    }
    BlockBuild b;
    b.entry = name;
    using namespace gallery_detail;
    if (name == "1f1b") {
        b.block = one_f_one_b(d);
    } else if (name == "eager-1f1b") {
        b.block = eager_one_f_one_b(d, param("eagerness", d - 1));
    } else if (name == "gpipe") {
        b.block = gpipe(d, param("horizon", 4LL * d));
    } else if (name == "gems") {
        b.block = gems(d);
        b.replicated_weights = true;
    } else if (name == "chimera") {
        b.block = chimera(d);
        b.replicated_weights = true;
    } else if (name == "interleaved-1f1b") {
        if (d < 2) throw std::invalid_argument("interleaved-1f1b: needs d >= 2");
        b = interleaved_one_f_one_b(d);
    } else if (name == "interleaved-1f1b-uniform") {
        if (d < 2) throw std::invalid_argument("interleaved-1f1b-uniform: needs d >= 2");
        b.block = interleaved_uniform(d);
    } else if (name == "interleaved-low-mem") {
        if (d < 2) throw std::invalid_argument("interleaved-low-mem: needs d >= 2");
        b.block = interleaved_low_mem(d);
    } else if (name == "zb-h1") {
        b.block = zb_h1(d);
    } else if (name == "zb-h2") {
        b.block = zb_h2(d);
    } else if (name == "1f1b-v") {
        if (d < 2) throw std::invalid_argument("1f1b-v: needs d >= 2");
        b.block = one_f_one_b_v(d);
    } else if (name == "zb-2-3") {
        b.block = zb_2_3(d);
    } else if (name == "v-min") {
        if (d < 2) throw std::invalid_argument("v-min: needs d >= 2");
        b.block = v_min(d);
    } else if (name == "v-half") {
        if (d < 2) throw std::invalid_argument("v-half: needs d >= 2");
        b.block = v_half(d);
    } else if (name == "v-zb") {
        if (d < 2) throw std::invalid_argument("v-zb: needs d >= 2");
        b.block = v_zb(d);
    } else {
        throw std::invalid_argument("unknown gallery entry: " + name);
    }
    return b;
}

}  // namespace pipeblock
