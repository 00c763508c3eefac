#pragma once

#include "pipeblock/assemble.hpp"
#include "pipeblock/gallery.hpp"
#include "pipeblock/memory.hpp"
#include "pipeblock/simulate.hpp"

namespace pipeblock {

// Search family: v-shaped blocks whose chain spacings take one value below a
// split device K and another at or above it. Down edges (F stages 1..d and
// the mirrored B chain) share one pair of values, up edges (F stages d+1..2d
// and its mirror) the other; the three turn gaps are enumerated too, which
// covers the cell arrangements of both turning devices.
struct SearchSpec {
    int d = 0;
    int n = 0;  // microbatches per candidate evaluation; 0 means 3d
    RunTimeProfile profile;
    double memory_limit = 0.0;  // units of m
    long long delta_max = 6;
    long long tau_max = 6;

    int eval_n() const { return n > 0 ? n : 3 * d; }
};

struct SearchParams {
    int K = 1;
    long long d0_lo = 1, d1_lo = 1, d0_hi = 1, d1_hi = 1;
    long long tau1 = 1, tau2 = 1, tau3 = 1;

    auto tuple() const { return std::tie(K, d0_lo, d1_lo, d0_hi, d1_hi, tau1, tau2, tau3); }
    bool operator<(const SearchParams& o) const { return tuple() < o.tuple(); }
    bool operator==(const SearchParams& o) const { return tuple() == o.tuple(); }

    std::string str() const {
        std::ostringstream s;
        s << "K=" << K << " d0=(" << d0_lo << ',' << d0_hi << ") d1=(" << d1_lo << ',' << d1_hi
          << ") tau=(" << tau1 << ',' << tau2 << ',' << tau3 << ')';
        return s.str();
    }
};

struct SearchResult {
    bool feasible = false;
    std::string message;
    SearchParams best;
    BuildingBlock block;
    GridSchedule schedule;
    double bubble_rate = 1.0;
    double exact_peak = 0.0;
    long long candidates_enumerated = 0;
    long long candidates_evaluated = 0;
    double family_min_peak = 0.0;
    bool turn_devices_exercised = false;  // winner widened a device-d turn gap
};

struct FrontierPoint {
    double limit = 0.0;
    bool feasible = false;
    double bubble_rate = 1.0;  // convention: infeasible points report 1.0
    double exact_peak = 0.0;
    SearchParams best;
};

namespace search_detail {

inline VEdgeOffsets edges_for(int d, const SearchParams& c) {
    VEdgeOffsets e;
    e.down_edge.resize(d - 1);
    e.up_edge.resize(d - 1);
    for (int x = 0; x < d - 1; ++x) {
        int pair_down = x + 1;       // spans devices (x+1, x+2)
        int pair_up = d - x - 1;     // chain edge x+1 spans devices (d-x-1, d-x)
        e.down_edge[x] = pair_down < c.K ? c.d0_lo : c.d0_hi;
        e.up_edge[x] = pair_up <= c.K ? c.d1_lo : c.d1_hi;
    }
    e.tau1 = c.tau1;
    e.tau2 = c.tau2;
    e.tau3 = c.tau3;
    return e;
}

// chain starts without building a block; fs/bs sized 2d by the caller
inline void chain_starts(int d, const VEdgeOffsets& e, std::vector<long long>& fs,
                         std::vector<long long>& bs) {
    fs[0] = 0;
    for (int i = 2; i <= d; ++i) fs[i - 1] = fs[i - 2] + e.down_edge[i - 2];
    fs[d] = fs[d - 1] + e.tau1;
    for (int k = 2; k <= d; ++k) fs[d + k - 1] = fs[d + k - 2] + e.up_edge[k - 2];
    bs[2 * d - 1] = fs[2 * d - 1] + e.tau2;
    for (int k = 1; k <= d - 1; ++k) bs[2 * d - k - 1] = bs[2 * d - k] + e.down_edge[k - 1];
    bs[d - 1] = bs[d] + e.tau3;
    for (int l = 1; l <= d - 1; ++l) bs[d - l - 1] = bs[d - l] + e.up_edge[l - 1];
}

inline bool residues_distinct(int d, const std::vector<long long>& fs,
                              const std::vector<long long>& bs, long long interval) {
    for (int i = 1; i <= d; ++i) {
        unsigned mask = 0;
        long long cells[4] = {fs[i - 1], fs[2 * d - i], bs[2 * d - i], bs[i - 1]};
        for (long long c : cells) {
            unsigned bit = 1u << (c % interval);
            if (mask & bit) return false;
            mask |= bit;
        }
    }
    return true;
}

struct Eval {
    SearchParams params;
    double peak = 0.0;
    double bubble = 1.0;
};

}  // namespace search_detail

// Evaluates the whole family once: every residue-clean candidate is
// assembled (repeat, squeeze, reorder), simulated under the profile, and its
// exact peak recorded. Shared by search and frontier.
class FamilyEvaluation {
  public:
    explicit FamilyEvaluation(const SearchSpec& spec) : spec_(spec) {
        if (spec.d < 2) throw std::invalid_argument("search: d must be at least 2");
        if (spec.delta_max < 1 || spec.tau_max < 1)
            throw std::invalid_argument("search: ranges must be positive");
        run();
    }

    long long enumerated() const { return enumerated_; }
    long long evaluated() const { return static_cast<long long>(evals_.size()); }
    double family_min_peak() const { return min_peak_; }

    // best candidate with peak within limit; lexicographic tie-break
    std::optional<search_detail::Eval> best_under(double limit) const {
        std::optional<search_detail::Eval> best;
        for (const auto& e : evals_) {
            if (e.peak > limit + 1e-9) continue;
            if (!best || e.bubble < best->bubble - 1e-12 ||
                (std::abs(e.bubble - best->bubble) <= 1e-12 && e.params < best->params))
                best = e;
        }
        return best;
    }

    BuildingBlock rebuild(const SearchParams& p) const {
        BuildingBlock blk =
            make_v_block_edges(spec_.d, search_detail::edges_for(spec_.d, p), interval_);
        if (!add_greedy_w(blk)) throw std::logic_error("search: W fill failed on rebuild");
        return blk;
    }

  private:
    void run() {
        int d = spec_.d;
        std::vector<long long> fs(2 * d), bs(2 * d);
        SearchParams c;
        for (c.K = 1; c.K <= d; ++c.K)
            for (c.d0_lo = 1; c.d0_lo <= spec_.delta_max; ++c.d0_lo)
                for (c.d1_lo = 1; c.d1_lo <= spec_.delta_max; ++c.d1_lo)
                    for (c.d0_hi = 1; c.d0_hi <= spec_.delta_max; ++c.d0_hi)
                        for (c.d1_hi = 1; c.d1_hi <= spec_.delta_max; ++c.d1_hi)
                            for (c.tau1 = 1; c.tau1 <= spec_.tau_max; ++c.tau1)
                                for (c.tau2 = 1; c.tau2 <= spec_.tau_max; ++c.tau2)
                                    for (c.tau3 = 1; c.tau3 <= spec_.tau_max; ++c.tau3) {
                                        ++enumerated_;
                                        if (!canonical(c)) continue;
                                        auto e = search_detail::edges_for(d, c);
                                        search_detail::chain_starts(d, e, fs, bs);
                                        if (!search_detail::residues_distinct(d, fs, bs, interval_))
                                            continue;
                                        evaluate(c);
                                    }
        for (const auto& e : evals_) min_peak_ = std::min(min_peak_, e.peak);
    }

    // parameters that touch no edge are pinned to 1 so each concrete offset
    // assignment is enumerated once
    bool canonical(const SearchParams& c) const {
        int d = spec_.d;
        if (c.K == 1 && c.d0_lo != 1) return false;
        if (c.K == d && c.d0_hi != 1) return false;
        if (c.K >= d - 1 && c.d1_hi != 1) return false;
        return true;
    }

    void evaluate(const SearchParams& c) {
        BuildingBlock blk = rebuild(c);
        BlockBuild build;
        build.entry = "search";
        build.block = blk;
        GridSchedule sched = assemble(build, spec_.eval_n());
        SimResult sim = simulate(sched, spec_.profile);
        search_detail::Eval e;
        e.params = c;
        e.peak = exact_peak(sched).max;
        e.bubble = sim.bubble_rate;
        evals_.push_back(e);
    }

    SearchSpec spec_;
    long long interval_ = 6;
    long long enumerated_ = 0;
    double min_peak_ = std::numeric_limits<double>::infinity();
    std::vector<search_detail::Eval> evals_;
};

inline SearchResult search_with(const FamilyEvaluation& fam, const SearchSpec& spec) {
    SearchResult res;
    res.candidates_enumerated = fam.enumerated();
    res.candidates_evaluated = fam.evaluated();
    res.family_min_peak = fam.family_min_peak();
    auto best = fam.best_under(spec.memory_limit);
    if (!best) {
        res.feasible = false;
        std::ostringstream msg;
        msg << "infeasible: memory limit " << spec.memory_limit
            << "m is below the family minimum " << fam.family_min_peak() << "m";
        res.message = msg.str();
        return res;
    }
    res.feasible = true;
    res.best = best->params;
    res.bubble_rate = best->bubble;
    res.exact_peak = best->peak;
    res.block = fam.rebuild(best->params);
    BlockBuild build;
    build.entry = "search";
    build.block = res.block;
    res.schedule = assemble(build, spec.eval_n());
    res.turn_devices_exercised = best->params.tau1 != 1 || best->params.tau3 != 1;
    return res;
}

inline SearchResult search(const SearchSpec& spec) {
    FamilyEvaluation fam(spec);
    return search_with(fam, spec);
}

inline std::vector<FrontierPoint> frontier(const SearchSpec& spec,
                                           const std::vector<double>& limits) {
    FamilyEvaluation fam(spec);
    std::vector<FrontierPoint> points;
    for (double limit : limits) {
        SearchSpec s = spec;
        s.memory_limit = limit;
        FrontierPoint pt;
        pt.limit = limit;
        auto best = fam.best_under(limit);
        if (best) {
            pt.feasible = true;
            pt.bubble_rate = best->bubble;
            pt.exact_peak = best->peak;
            pt.best = best->params;
        }
        points.push_back(pt);
    }
    return points;
}

}  // namespace pipeblock
