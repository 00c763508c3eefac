// walks every built-in block at d=4, assembles a short run and shows the
// resulting grid next to its bubble and footprint numbers

#include <iostream>

#include "pipeblock/document.hpp"
#include "pipeblock/gallery.hpp"
#include "pipeblock/render.hpp"
#include "pipeblock/simulate.hpp"

int main() {
    using namespace pipeblock;
    const int d = 4;
    const int n = 8;
    for (const auto& info : gallery()) {
        std::cout << "== " << info.name << ": " << info.summary << "\n";
        try {
            BlockBuild b = build_entry(info.name, d);
            GridSchedule sched = assemble(b, n);
            SimResult sim = simulate(sched, RunTimeProfile{});
            auto peak = exact_peak(sched);
            std::cout << "   makespan " << sim.makespan << " cells, bubble "
                      << 100.0 * sim.bubble_rate << "%, peak " << peak.max << " m\n";
            ScheduleDocument doc = document_from_grid(sched);
            doc.metadata.source_block = info.name;
            std::cout << render_ascii(doc);
        } catch (const std::exception& e) {
            std::cout << "   skipped: " << e.what() << "\n";
        }
        std::cout << "\n";
    }
    return 0;
}
