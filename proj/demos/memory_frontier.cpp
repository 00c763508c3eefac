// sweeps the per-device memory limit for a profiled d=6 pipeline and prints
// how far the searched v-family can push the bubble down at each budget

#include <iomanip>
#include <iostream>

#include "pipeblock/search.hpp"

int main() {
    using namespace pipeblock;
    SearchSpec spec;
    spec.d = 6;
    spec.profile = {12.96, 13.22, 9.76, 0.0};

    std::vector<double> limits;
    for (double f = 0.25; f <= 1.0 + 1e-9; f += 0.125) limits.push_back(f * 2.0 * spec.d);

    std::cout << "d=" << spec.d << ", profile f=" << spec.profile.f << " b=" << spec.profile.b
              << " w=" << spec.profile.w << ", evaluated at n=" << spec.eval_n() << "\n\n";
    std::cout << "limit(M)  bubble    peak(m)  best\n";
    for (const auto& p : frontier(spec, limits)) {
        std::cout << std::setw(8) << p.limit / (2.0 * spec.d) << "  ";
        if (!p.feasible) {
            std::cout << "infeasible\n";
            continue;
        }
        std::cout << std::setw(7) << std::fixed << std::setprecision(2) << 100.0 * p.bubble_rate
                  << "%  " << std::setw(7) << std::defaultfloat << p.exact_peak << "  "
                  << p.best.str() << "\n";
    }

    std::cout << "\nfixed points of the same family:\n";
    for (const char* name : {"v-min", "v-half", "v-zb"}) {
        BlockBuild b = build_entry(name, spec.d);
        GridSchedule sched = assemble(b, 3 * spec.d);
        SimResult sim = simulate(sched, spec.profile);
        auto peak = exact_peak(sched);
        std::cout << "  " << std::left << std::setw(8) << name << std::right << " bubble "
                  << std::fixed << std::setprecision(2) << 100.0 * sim.bubble_rate << "%, peak "
                  << std::defaultfloat << peak.max << " m\n";
    }
    return 0;
}
