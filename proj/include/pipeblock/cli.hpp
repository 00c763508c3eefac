#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <unistd.h>

#include "CLI11.hpp"
#include "pipeblock/document.hpp"
#include "pipeblock/gallery.hpp"
#include "pipeblock/growth.hpp"
#include "pipeblock/memory.hpp"
#include "pipeblock/render.hpp"
#include "pipeblock/search.hpp"
#include "pipeblock/simulate.hpp"

namespace pipeblock {
namespace cli_detail {

inline std::string slurp(const std::string& path, std::istream& in) {
    if (path == "-") {
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open input file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

inline void spill(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << content;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    f << content;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
}

inline std::map<std::string, long long> parse_params(const std::vector<std::string>& kvs) {
    std::map<std::string, long long> params;
    for (const auto& kv : kvs) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad --param '" + kv + "', expected key=value");
        try {
            params[kv.substr(0, eq)] = std::stoll(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw std::runtime_error("bad --param value in '" + kv + "'");
        }
    }
    return params;
}

// memory limits read either in units of m ("12") or as a fraction of the
// full per-microbatch footprint M = 2*d*m ("0.5M")
inline double parse_mem_limit(std::string s, int d) {
    if (s.empty()) throw std::runtime_error("empty --mem-limit");
    double factor = 1.0;
    char suffix = s.back();
    if (suffix == 'M') {
        factor = 2.0 * d;
        s.pop_back();
    } else if (suffix == 'm') {
        s.pop_back();
    }
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::runtime_error("");
        if (v < 0) throw std::runtime_error("");
        return v * factor;
    } catch (const std::exception&) {
        throw std::runtime_error("bad --mem-limit, expected a number like 12, 6m or 0.5M");
    }
}

inline bool color_enabled(std::ostream& out) {
    const char* env = std::getenv("PIPEBLOCK_COLOR");
    std::string v = env ? env : "auto";
    if (v == "always") return true;
    if (v == "never") return false;
    return &out == &std::cout && isatty(fileno(stdout)) != 0;
}

inline ScheduleDocument block_document(const BlockBuild& b) {
    GridSchedule g;
    g.topology = b.block.topology;
    g.microbatches = b.block.microbatches_per_block;
    for (const auto& p : b.block.passes)
        g.passes.push_back({b.block.topology.device_of(p.stage), p.stage, p.kind, p.microbatch,
                            p.offset, pass_width(p.kind)});
    ScheduleDocument doc = document_from_grid(g);
    doc.metadata.source_block = b.entry;
    doc.metadata.steps = {"build"};
    doc.metadata.replicated_weights = b.replicated_weights;
    doc.block = b.block;
    doc.has_pattern = true;
    if (b.explicit_starts)
        doc.pattern = RepeatPattern::explicit_starts(b.explicit_starts(b.block.topology.devices));
    else
        doc.pattern = RepeatPattern::uniform();
    return doc;
}

inline BlockBuild build_from_document(const ScheduleDocument& doc) {
    if (!doc.block)
        throw std::runtime_error("document has no block section; pass --block NAME instead");
    BlockBuild b;
    b.entry = doc.metadata.source_block.value_or("block");
    b.block = *doc.block;
    b.replicated_weights = doc.metadata.replicated_weights;
    if (doc.has_pattern && doc.pattern.kind == RepeatPattern::Kind::Explicit) {
        std::vector<long long> starts = doc.pattern.starts;
        b.explicit_starts = [starts](int instances) {
            if (static_cast<size_t>(instances) != starts.size())
                throw std::invalid_argument(
                    "document's explicit repeat pattern covers " + std::to_string(starts.size()) +
                    " instances; rebuild via --block for other microbatch counts");
            return starts;
        };
    }
    return b;
}

inline ScheduleDocument assembled_document(const BlockBuild& b, const GridSchedule& sched,
                                           const AssembleOptions& opts) {
    ScheduleDocument doc = document_from_grid(sched);
    doc.metadata.source_block = b.entry;
    doc.metadata.steps = {"repeat"};
    if (opts.do_squeeze) doc.metadata.steps.push_back("squeeze");
    if (opts.do_reorder) doc.metadata.steps.push_back("reorder");
    doc.metadata.replicated_weights = b.replicated_weights;
    doc.block = b.block;
    return doc;
}

inline double route_footprint(const Topology& topo) {
    double m = 0.0;
    for (int s : topo.routes[0]) m += topo.mem_of(s);
    return m;
}

inline std::string pct(double x) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * x << '%';
    return s.str();
}

inline std::string num(double x) {
    std::ostringstream s;
    s << std::setprecision(10) << x;
    return s.str();
}

}  // namespace cli_detail

// In-process entry point; main() forwards to this. Returns the process exit
// code: 0 on success, 1 on domain failures (collisions, infeasible search,
// invalid documents), 2 on usage errors.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err,
                   std::istream& in = std::cin) {
    using namespace cli_detail;
    CLI::App app{"building-block pipeline schedules: synthesize, validate, analyze"};
    app.name("pipeblock");
    app.require_subcommand(1);

    // shared option storage
    std::string block_name, input_path, out_path = "-", svg_path, limits_csv, blocks_csv,
                mem_limit_str;
    std::vector<std::string> param_kvs;
    int devices = 0, microbatches = 0, max_width = 200;
    long long delta_max = 6, tau_max = 6;
    RunTimeProfile prof;
    bool strict = false, no_squeeze = false, no_reorder = false, want_text = false, stamp = false,
         overlay = false, csv = false, show_lifespans = false, show_witness = false;

    auto add_profile = [&](CLI::App* cmd) {
        cmd->add_option("--tf", prof.f, "forward pass duration")->capture_default_str();
        cmd->add_option("--tb", prof.b, "input-gradient pass duration")->capture_default_str();
        cmd->add_option("--tw", prof.w, "weight-gradient pass duration")->capture_default_str();
        cmd->add_option("--comm", prof.comm, "cross-device hop latency")->capture_default_str();
    };

    CLI::App* c_gallery = app.add_subcommand("gallery", "list the built-in building blocks");
    c_gallery->add_option("--devices", devices, "also instantiate each entry at this device count");

    CLI::App* c_build = app.add_subcommand("build", "emit one building block as a document");
    c_build->add_option("--block", block_name, "gallery entry name")->required();
    c_build->add_option("--devices", devices, "device count")->required();
    c_build->add_option("--param", param_kvs, "entry parameter, key=value");
    c_build->add_option("--out", out_path, "output file, - for stdout");

    CLI::App* c_assemble =
        app.add_subcommand("assemble", "repeat a block into a full schedule, then tighten it");
    c_assemble->add_option("input", input_path, "block document, - for stdin");
    c_assemble->add_option("--block", block_name, "gallery entry name (instead of a document)");
    c_assemble->add_option("--devices", devices, "device count (with --block)");
    c_assemble->add_option("--param", param_kvs, "entry parameter, key=value");
    c_assemble->add_option("--microbatches", microbatches, "microbatch count")->required();
    c_assemble->add_flag("--no-squeeze", no_squeeze, "skip the compaction step");
    c_assemble->add_flag("--no-reorder", no_reorder, "skip warm-up and cool-down reshaping");
    c_assemble->add_option("--out", out_path, "output file, - for stdout");

    CLI::App* c_simulate =
        app.add_subcommand("simulate", "replay a cells-units schedule under real durations");
    c_simulate->add_option("input", input_path, "schedule document, - for stdin")->required();
    add_profile(c_simulate);
    c_simulate->add_option("--out", svg_path, "also write the timed schedule document here");

    CLI::App* c_analyze =
        app.add_subcommand("analyze", "memory and stable-phase growth of a schedule document");
    c_analyze->add_option("input", input_path, "schedule document, - for stdin")->required();
    add_profile(c_analyze);
    c_analyze->add_flag("--lifespans", show_lifespans, "print per-(stage, slot) lifespans");
    c_analyze->add_flag("--witness", show_witness, "print the growth witness chain");

    CLI::App* c_search =
        app.add_subcommand("search", "best v-shaped block under a memory limit");
    c_search->add_option("--devices", devices, "device count")->required();
    c_search->add_option("--mem-limit", mem_limit_str, "per-device limit, e.g. 12, 6m or 0.5M")
        ->required();
    c_search->add_option("--microbatches", microbatches, "evaluation microbatches, default 3d");
    add_profile(c_search);
    c_search->add_option("--delta-max", delta_max, "largest chain spacing tried")
        ->capture_default_str();
    c_search->add_option("--tau-max", tau_max, "largest turn gap tried")->capture_default_str();
    c_search->add_option("--out", out_path, "write the winning schedule document here")
        ->expected(1);

    CLI::App* c_frontier =
        app.add_subcommand("frontier", "bubble rate across a sweep of memory limits");
    c_frontier->add_option("--devices", devices, "device count")->required();
    c_frontier->add_option("--microbatches", microbatches, "evaluation microbatches, default 3d");
    add_profile(c_frontier);
    c_frontier->add_option("--limits", limits_csv, "comma list, default 0.25M..1M by 0.125M");
    c_frontier->add_option("--delta-max", delta_max, "largest chain spacing tried")
        ->capture_default_str();
    c_frontier->add_option("--tau-max", tau_max, "largest turn gap tried")->capture_default_str();
    c_frontier->add_flag("--csv", csv, "machine-readable output");

    CLI::App* c_render = app.add_subcommand("render", "draw a schedule document");
    c_render->add_option("input", input_path, "schedule document, - for stdin")->required();
    c_render->add_option("--svg", svg_path, "write an svg here, - for stdout");
    c_render->add_flag("--text", want_text, "character grid on stdout (default)");
    c_render->add_flag("--stamp", stamp, "embed a generation timestamp in the svg");
    c_render->add_option("--max-width", max_width, "text columns before downsampling")
        ->capture_default_str();
    c_render->add_flag("--overlay-witness", overlay,
                       "highlight the growth witness chain (needs a block section)");
    add_profile(c_render);

    CLI::App* c_compare = app.add_subcommand("compare", "assemble and simulate several entries");
    c_compare->add_option("--blocks", blocks_csv, "comma-separated gallery entries")->required();
    c_compare->add_option("--devices", devices, "device count")->required();
    c_compare->add_option("--microbatches", microbatches, "microbatch count")->required();
    add_profile(c_compare);
    c_compare->add_flag("--csv", csv, "machine-readable output");

    for (auto* cmd : {c_assemble, c_simulate, c_analyze, c_render})
        cmd->add_flag("--strict", strict, "reject unknown document fields");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(c_gallery)) {
            for (const auto& info : gallery()) {
                out << std::left << std::setw(26) << info.name << std::setw(14) << info.validity
                    << info.summary << '\n';
                if (devices > 0) {
                    try {
                        BlockBuild b = build_entry(info.name, devices);
                        auto bound = peak_bound(b.block);
                        out << "    d=" << devices << ": interval " << b.block.interval
                            << " cells, " << b.block.microbatches_per_block
                            << " microbatch(es) per block, peak bound " << num(bound.max)
                            << " m\n";
                    } catch (const std::exception& e) {
                        out << "    d=" << devices << ": unavailable (" << e.what() << ")\n";
                    }
                }
            }
            return 0;
        }

        if (app.got_subcommand(c_build)) {
            BlockBuild b = build_entry(block_name, devices, parse_params(param_kvs));
            ScheduleDocument doc = block_document(b);
            spill(out_path, emit(doc), out);
            if (out_path != "-")
                out << "wrote " << out_path << " (" << b.block.passes.size() << " passes, interval "
                    << b.block.interval << ")\n";
            return 0;
        }

        if (app.got_subcommand(c_assemble)) {
            BlockBuild b;
            if (!block_name.empty()) {
                if (devices <= 0)
                    throw std::runtime_error("--block needs --devices");
                b = build_entry(block_name, devices, parse_params(param_kvs));
            } else if (!input_path.empty()) {
                b = build_from_document(parse(slurp(input_path, in), strict));
            } else {
                throw std::runtime_error("assemble needs a document or --block NAME --devices D");
            }
            AssembleOptions opts;
            opts.do_squeeze = !no_squeeze;
            opts.do_reorder = !no_reorder;
            GridSchedule sched = assemble(b, microbatches, opts);
            ScheduleDocument doc = assembled_document(b, sched, opts);
            long long makespan = 0;
            for (const auto& p : sched.passes) makespan = std::max(makespan, p.start + p.duration);
            std::ostream& note = out_path == "-" ? err : out;
            spill(out_path, emit(doc), out);
            note << "assembled " << b.entry << ": d=" << sched.topology.devices
                 << " n=" << microbatches << " makespan=" << makespan << " cells\n";
            return 0;
        }

        if (app.got_subcommand(c_simulate)) {
            ScheduleDocument doc = parse(slurp(input_path, in), strict);
            if (!doc.is_grid())
                throw std::runtime_error("simulate expects a cells-units document");
            if (doc.grid.passes.empty()) throw std::runtime_error("schedule has no passes");
            SimResult sim = simulate(doc.grid, prof);
            out << "makespan: " << num(sim.makespan) << "\n";
            out << "bubble rate: " << pct(sim.bubble_rate) << "\n";
            out << "peak memory: " << num(sim.peak.max) << " m\n";
            out << "device     busy     idle  idle-in-span  peak(m)\n";
            for (int dev = 0; dev < doc.topology.devices; ++dev)
                out << std::setw(6) << dev + 1 << ' ' << std::setw(8) << num(sim.busy[dev]) << ' '
                    << std::setw(8) << num(sim.idle_total[dev]) << "  " << std::setw(12)
                    << num(sim.idle_span[dev]) << "  " << num(sim.peak.per_device[dev]) << "\n";
            if (!svg_path.empty()) {
                ScheduleDocument timed = document_from_timed(sim.schedule);
                timed.metadata = doc.metadata;
                timed.metadata.profile = prof;
                timed.metadata.steps.push_back("simulate");
                timed.block = doc.block;
                spill(svg_path, emit(timed), out);
                if (svg_path != "-") out << "wrote " << svg_path << "\n";
            }
            return 0;
        }

        if (app.got_subcommand(c_analyze)) {
            ScheduleDocument doc = parse(slurp(input_path, in), strict);
            out << "source: " << doc.metadata.source_block.value_or("(unnamed)") << ", units "
                << doc.units << ", d=" << doc.topology.devices
                << ", stages=" << doc.topology.num_stages << ", microbatches=" << doc.microbatches
                << "\n";
            auto print_peaks = [&](const DeviceValues& peak, const char* label) {
                out << label << ":";
                for (double v : peak.per_device) out << ' ' << num(v);
                out << "  (max " << num(peak.max) << " m)\n";
            };
            if (doc.is_grid()) {
                double span = 0;
                for (const auto& p : doc.grid.passes)
                    span = std::max(span, static_cast<double>(p.start + p.duration));
                out << "makespan: " << num(span) << " cells\n";
                print_peaks(exact_peak(doc.grid), "exact peak per device (m)");
            } else {
                double span = 0;
                for (const auto& p : doc.timed.passes) span = std::max(span, p.start + p.duration);
                out << "makespan: " << num(span) << "\n";
                print_peaks(exact_peak(doc.timed), "exact peak per device (m)");
            }
            if (!doc.block) {
                out << "no block section: lifespan bound and growth skipped\n";
                return 0;
            }
            const BuildingBlock& blk = *doc.block;
            out << "block: interval " << blk.interval << " cells, "
                << blk.microbatches_per_block << " microbatch(es) per block\n";
            print_peaks(peak_bound(blk), "lifespan memory bound per device (m)");
            if (show_lifespans) {
                for (const auto& l : lifespans(blk))
                    out << "  stage " << l.stage << " slot " << l.slot << ": " << l.f_start << ".."
                        << l.release << " (length " << l.length() << ")\n";
            }
            if (doc.has_pattern && doc.pattern.kind == RepeatPattern::Kind::Explicit)
                out << "note: block repeats at explicit starts; growth below describes the "
                       "uniform repeat\n";
            GrowthReport g = growth_rate(blk, prof);
            out << "growth per period: " << num(g.growth) << " against per-device work "
                << num(g.max_work) << "\n";
            out << "repeating bubble: " << num(g.repeating_bubble) << " per period, so the bubble "
                << (g.linear_bubble ? "grows with the microbatch count"
                                    : "stays bounded by warm-up and cool-down")
                << "\n";
            if (show_witness) {
                out << "witness chain:\n";
                for (const auto& w : g.witness) out << "  " << w << "\n";
            }
            return 0;
        }

        if (app.got_subcommand(c_search)) {
            SearchSpec spec;
            spec.d = devices;
            spec.n = microbatches;
            spec.profile = prof;
            spec.memory_limit = parse_mem_limit(mem_limit_str, devices);
            spec.delta_max = delta_max;
            spec.tau_max = tau_max;
            SearchResult res = search(spec);
            out << "scanned " << res.candidates_enumerated << " candidates, evaluated "
                << res.candidates_evaluated << " under limit " << num(spec.memory_limit)
                << " m (" << num(spec.memory_limit / (2.0 * devices)) << " M)\n";
            if (!res.feasible) {
                out << "no schedule fits: " << res.message << "\n";
                out << "smallest footprint in this family: " << num(res.family_min_peak)
                    << " m\n";
                err << "error: search infeasible under the given memory limit\n";
                return 1;
            }
            out << "best: " << res.best.str() << "\n";
            out << "bubble rate: " << pct(res.bubble_rate) << ", exact peak " << num(res.exact_peak)
                << " m\n";
            if (res.turn_devices_exercised)
                out << "note: the winner widens a turn gap, so the turning devices' cell "
                       "arrangements were searched too\n";
            if (out_path != "-") {
                BlockBuild b;
                b.entry = "search-best";
                b.block = res.block;
                ScheduleDocument doc = assembled_document(b, res.schedule, AssembleOptions{});
                spill(out_path, emit(doc), out);
                out << "wrote " << out_path << "\n";
            }
            return 0;
        }

        if (app.got_subcommand(c_frontier)) {
            SearchSpec spec;
            spec.d = devices;
            spec.n = microbatches;
            spec.profile = prof;
            spec.delta_max = delta_max;
            spec.tau_max = tau_max;
            std::vector<double> limits;
            if (limits_csv.empty()) {
                for (double f = 0.25; f <= 1.0 + 1e-9; f += 0.125)
                    limits.push_back(f * 2.0 * devices);
            } else {
                for (const auto& tok : split_list(limits_csv))
                    limits.push_back(parse_mem_limit(tok, devices));
            }
            auto points = frontier(spec, limits);
            if (csv) {
                out << "limit_m,limit_M,feasible,bubble_rate,peak_m\n";
                for (const auto& p : points)
                    out << num(p.limit) << ',' << num(p.limit / (2.0 * devices)) << ','
                        << (p.feasible ? 1 : 0) << ',' << num(p.bubble_rate) << ','
                        << num(p.exact_peak) << "\n";
            } else {
                out << "limit(m)  limit(M)  feasible  bubble    peak(m)  best\n";
                for (const auto& p : points) {
                    out << std::setw(8) << num(p.limit) << "  " << std::setw(8)
                        << num(p.limit / (2.0 * devices)) << "  " << std::setw(8)
                        << (p.feasible ? "yes" : "no") << "  " << std::setw(8)
                        << (p.feasible ? pct(p.bubble_rate) : std::string("-")) << "  "
                        << std::setw(7) << (p.feasible ? num(p.exact_peak) : std::string("-"))
                        << "  " << (p.feasible ? p.best.str() : std::string("-")) << "\n";
                }
            }
            return 0;
        }

        if (app.got_subcommand(c_render)) {
            ScheduleDocument doc = parse(slurp(input_path, in), strict);
            RenderOptions opts;
            opts.stamp = stamp;
            opts.ascii_max_width = max_width;
            if (overlay) {
                if (!doc.block)
                    throw std::runtime_error("--overlay-witness needs a block section");
                GrowthReport g = growth_rate(*doc.block, prof);
                std::set<std::string> lit;
                for (const auto& w : g.witness) lit.insert(w.substr(0, w.find('@')));
                int mpb = doc.block->microbatches_per_block;
                auto mark = [&](const auto& passes) {
                    opts.highlight.assign(passes.size(), 0);
                    for (size_t i = 0; i < passes.size(); ++i) {
                        const auto& p = passes[i];
                        std::string label = pass_name(p.kind) + "(stage " +
                                            std::to_string(p.stage) + ", slot " +
                                            std::to_string(p.microbatch % std::max(1, mpb)) + ")";
                        if (lit.count(label)) opts.highlight[i] = 1;
                    }
                };
                if (doc.is_grid())
                    mark(doc.grid.passes);
                else
                    mark(doc.timed.passes);
            }
            if (!svg_path.empty()) {
                spill(svg_path, render_svg(doc, opts), out);
                if (svg_path != "-") out << "wrote " << svg_path << "\n";
            }
            if (want_text || svg_path.empty()) {
                opts.ascii_color = color_enabled(out);
                out << render_ascii(doc, opts);
            }
            return 0;
        }

        if (app.got_subcommand(c_compare)) {
            auto names = split_list(blocks_csv);
            if (names.empty()) throw std::runtime_error("--blocks lists no entries");
            auto rows = compare(names, microbatches, prof, [&](const std::string& name) {
                return build_entry(name, devices);
            });
            if (csv) {
                out << "block,makespan,bubble_rate,peak_m,error\n";
                for (const auto& r : rows) {
                    out << r.name << ',';
                    if (r.ok)
                        out << num(r.makespan) << ',' << num(r.bubble_rate) << ',' << num(r.peak)
                            << ',';
                    else
                        out << ",,," << '"' << r.error << '"';
                    out << "\n";
                }
            } else {
                out << "| block | makespan | bubble | peak (m) |\n";
                out << "|---|---:|---:|---:|\n";
                for (const auto& r : rows) {
                    if (r.ok)
                        out << "| " << r.name << " | " << num(r.makespan) << " | "
                            << pct(r.bubble_rate) << " | " << num(r.peak) << " |\n";
                    else
                        out << "| " << r.name << " | error: " << r.error << " | | |\n";
                }
            }
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "error: no subcommand\n";
    return 2;
}

}  // namespace pipeblock
