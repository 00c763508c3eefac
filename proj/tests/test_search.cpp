#include <catch2/catch_amalgamated.hpp>

#include "pipeblock/search.hpp"
#include "pipeblock/simulate.hpp"

using namespace pipeblock;
using Catch::Approx;

namespace {

SearchSpec spec_d4() {
    SearchSpec spec;
    spec.d = 4;
    spec.profile = RunTimeProfile::unit();
    return spec;
}

// evaluating the full family takes a minute, so every case shares one run
const FamilyEvaluation& family_d4() {
    static FamilyEvaluation fam(spec_d4());
    return fam;
}

}  // namespace

TEST_CASE("the family's coordinates reproduce the fixed v blocks") {
    const FamilyEvaluation& fam = family_d4();

    SearchParams vmin;  // all chain gaps 1, no widened turns
    CHECK(fam.rebuild(vmin).passes == build_entry("v-min", 4).block.passes);

    SearchParams vhalf;
    vhalf.d0_hi = 2;
    vhalf.tau1 = 2;
    vhalf.tau2 = 4;
    CHECK(fam.rebuild(vhalf).passes == build_entry("v-half", 4).block.passes);

    SearchParams vzb;
    vzb.d0_hi = 4;
    vzb.d1_lo = 2;
    vzb.d1_hi = 2;
    CHECK(fam.rebuild(vzb).passes == build_entry("v-zb", 4).block.passes);
}

TEST_CASE("family search at four devices") {
    SearchSpec spec = spec_d4();
    const FamilyEvaluation& fam = family_d4();

    CHECK(fam.enumerated() == 4LL * 6 * 6 * 6 * 6 * 6 * 6 * 6);
    CHECK(fam.evaluated() > 0);
    CHECK(fam.evaluated() < fam.enumerated());
    CHECK(fam.family_min_peak() == Approx(4.0));

    // the fixed blocks are members, so the best can only match or beat them
    auto bubble_of = [&](const char* name) {
        auto sched = assemble(build_entry(name, 4), spec.eval_n());
        return simulate(sched, spec.profile).bubble_rate;
    };

    spec.memory_limit = 4.0;
    auto tight = search_with(fam, spec);
    REQUIRE(tight.feasible);
    CHECK(tight.exact_peak <= 4.0 + 1e-9);
    CHECK(tight.bubble_rate <= bubble_of("v-min") + 1e-12);
    CHECK(validate_schedule(tight.schedule).ok());
    CHECK(tight.turn_devices_exercised == (tight.best.tau1 != 1 || tight.best.tau3 != 1));

    spec.memory_limit = 6.0;
    auto mid = search_with(fam, spec);
    REQUIRE(mid.feasible);
    CHECK(mid.exact_peak <= 6.0 + 1e-9);
    CHECK(mid.bubble_rate <= bubble_of("v-half") + 1e-12);

    spec.memory_limit = 8.0;
    auto ample = search_with(fam, spec);
    REQUIRE(ample.feasible);
    CHECK(ample.bubble_rate <= bubble_of("v-zb") + 1e-12);

    // more memory never costs throughput
    CHECK(mid.bubble_rate <= tight.bubble_rate + 1e-12);
    CHECK(ample.bubble_rate <= mid.bubble_rate + 1e-12);

    spec.memory_limit = 3.9;
    auto starved = search_with(fam, spec);
    CHECK_FALSE(starved.feasible);
    CHECK(starved.bubble_rate == 1.0);
    CHECK(starved.message.find("infeasible: memory limit") != std::string::npos);
    CHECK(starved.message.find("below the family minimum") != std::string::npos);

    // the frontier agrees point by point with individual queries; a narrow
    // range keeps the second family evaluation cheap
    SearchSpec small = spec_d4();
    small.delta_max = 3;
    small.tau_max = 3;
    FamilyEvaluation fam_small(small);
    auto points = frontier(small, {3.5, 4.0, 6.0, 8.0});
    REQUIRE(points.size() == 4);
    CHECK_FALSE(points[0].feasible);
    CHECK(points[0].bubble_rate == 1.0);
    for (size_t i = 1; i < points.size(); ++i) {
        CHECK(points[i].feasible);
        CHECK(points[i].exact_peak <= points[i].limit + 1e-9);
        auto best = fam_small.best_under(points[i].limit);
        REQUIRE(best.has_value());
        CHECK(points[i].best == best->params);
        CHECK(points[i].bubble_rate == Approx(best->bubble));
    }
    CHECK(points[2].bubble_rate <= points[1].bubble_rate + 1e-12);
    CHECK(points[3].bubble_rate <= points[2].bubble_rate + 1e-12);
}

TEST_CASE("residue screening agrees with the block level check") {
    int d = 4;
    std::vector<long long> fs(2 * d), bs(2 * d);
    int agreements = 0;
    SearchParams c;
    for (c.K = 1; c.K <= d; ++c.K)
        for (c.d0_hi = 1; c.d0_hi <= 3; ++c.d0_hi)
            for (c.d1_hi = 1; c.d1_hi <= 3; ++c.d1_hi)
                for (c.tau1 = 1; c.tau1 <= 3; ++c.tau1)
                    for (c.tau2 = 1; c.tau2 <= 3; ++c.tau2) {
                        auto e = search_detail::edges_for(d, c);
                        search_detail::chain_starts(d, e, fs, bs);
                        bool fast = search_detail::residues_distinct(d, fs, bs, 6);
                        auto blk = make_v_block_edges(d, e, 6);
                        bool slow = !find_residue_clash(blk).has_value();
                        REQUIRE(fast == slow);
                        ++agreements;
                    }
    CHECK(agreements == 4 * 3 * 3 * 3 * 3);
}

TEST_CASE("search input validation") {
    SearchSpec spec = spec_d4();
    spec.d = 1;
    CHECK_THROWS_AS(FamilyEvaluation(spec), std::invalid_argument);
    spec.d = 4;
    spec.delta_max = 0;
    CHECK_THROWS_AS(FamilyEvaluation(spec), std::invalid_argument);
}

TEST_CASE("parameter names read back") {
    SearchParams p;
    p.K = 2;
    p.d0_hi = 3;
    p.tau2 = 4;
    CHECK(p.str() == "K=2 d0=(1,3) d1=(1,1) tau=(1,4,1)");
}
