#pragma once

#include <variant>

#include "json.hpp"
#include "pipeblock/assemble.hpp"
#include "pipeblock/model.hpp"

namespace pipeblock {

using ordered_json = nlohmann::ordered_json;

struct DocumentError : std::runtime_error {
    explicit DocumentError(const std::string& where, const std::string& what)
        : std::runtime_error(where.empty() ? what : where + ": " + what) {}
};

// On-disk schedule: format_version 1, units "cells" (integer design grid) or
// "time" (simulated), passes sorted by (device, start). Unknown fields are
// kept for round-tripping unless strict parsing is requested.
struct ScheduleDocument {
    int format_version = 1;
    std::string units = "cells";
    Topology topology;
    int microbatches = 0;
    GridSchedule grid;    // populated when units == "cells"
    TimedSchedule timed;  // populated when units == "time"

    struct Meta {
        std::optional<std::string> source_block;
        std::vector<std::string> steps;
        std::optional<RunTimeProfile> profile;
        bool replicated_weights = false;
        ordered_json extras = ordered_json::object();
    } metadata;

    std::optional<BuildingBlock> block;
    RepeatPattern pattern;
    bool has_pattern = false;

    ordered_json extras = ordered_json::object();

    bool is_grid() const { return units == "cells"; }
};

namespace doc_detail {

inline bool default_routes(const Topology& t) {
    return t.routes.size() == 1 && t.routes[0] == Topology::iota_route(1, t.num_stages);
}

template <typename Dur>
ordered_json passes_json(const std::vector<ScheduledPassT<Dur>>& passes) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : passes) {
        ordered_json j;
        j["device"] = p.device;
        j["stage"] = p.stage;
        j["kind"] = pass_name(p.kind);
        j["microbatch"] = p.microbatch;
        j["start"] = p.start;
        j["duration"] = p.duration;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline const char* type_name(const ordered_json& j) {
    switch (j.type()) {
        case ordered_json::value_t::array: return "array";
        case ordered_json::value_t::object: return "object";
        case ordered_json::value_t::string: return "string";
        case ordered_json::value_t::boolean: return "boolean";
        case ordered_json::value_t::null: return "null";
        default: return j.is_number() ? "number" : "value";
    }
}

struct Cursor {
    const ordered_json* j;
    std::string path;

    [[noreturn]] void fail(const std::string& msg) const { throw DocumentError(path, msg); }

    Cursor at(const std::string& key) const {
        auto it = j->find(key);
        if (it == j->end()) fail("missing field '" + key + "'");
        return {&*it, path + "/" + key};
    }
    std::optional<Cursor> maybe(const std::string& key) const {
        auto it = j->find(key);
        if (it == j->end()) return std::nullopt;
        return Cursor{&*it, path + "/" + key};
    }
    Cursor item(size_t i) const { return {&(*j)[i], path + "/" + std::to_string(i)}; }

    const ordered_json& need(ordered_json::value_t t, const char* what) const {
        if (j->type() != t && !(t == ordered_json::value_t::number_float && j->is_number()))
            fail(std::string("expected ") + what + ", got " + type_name(*j));
        return *j;
    }
    long long as_int(const char* what = "integer") const {
        if (j->is_number_integer()) return j->get<long long>();
        if (j->is_number_float()) {
            double v = j->get<double>();
            if (v == static_cast<long long>(v)) return static_cast<long long>(v);
        }
        fail(std::string("expected ") + what + ", got " + type_name(*j));
    }
    double as_double() const {
        if (!j->is_number()) fail(std::string("expected number, got ") + type_name(*j));
        return j->get<double>();
    }
    std::string as_string() const {
        if (!j->is_string()) fail(std::string("expected string, got ") + type_name(*j));
        return j->get<std::string>();
    }
};

inline void check_known(const Cursor& c, const std::vector<std::string>& known, bool strict,
                        ordered_json* extras) {
    for (auto it = c.j->begin(); it != c.j->end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) != known.end()) continue;
        if (strict) c.fail("unknown field '" + it.key() + "'");
        if (extras) (*extras)[it.key()] = it.value();
    }
}

}  // namespace doc_detail

inline ordered_json to_json(const ScheduleDocument& doc) {
    ordered_json j;
    j["format_version"] = doc.format_version;
    j["units"] = doc.units;
    ordered_json topo;
    topo["devices"] = doc.topology.devices;
    topo["num_stages"] = doc.topology.num_stages;
    topo["placement"] = doc.topology.placement;
    topo["stage_mem"] = doc.topology.stage_mem;
    if (!doc_detail::default_routes(doc.topology)) topo["routes"] = doc.topology.routes;
    j["topology"] = std::move(topo);
    j["microbatches"] = doc.microbatches;
    j["passes"] = doc.is_grid() ? doc_detail::passes_json(doc.grid.passes)
                                : doc_detail::passes_json(doc.timed.passes);

    ordered_json meta = ordered_json::object();
    if (doc.metadata.source_block) meta["source_block"] = *doc.metadata.source_block;
    if (!doc.metadata.steps.empty()) meta["steps"] = doc.metadata.steps;
    if (doc.metadata.profile) {
        ordered_json prof;
        prof["f"] = doc.metadata.profile->f;
        prof["b"] = doc.metadata.profile->b;
        prof["w"] = doc.metadata.profile->w;
        prof["comm"] = doc.metadata.profile->comm;
        meta["profile"] = std::move(prof);
    }
    if (doc.metadata.replicated_weights) meta["replicated_weights"] = true;
    for (auto it = doc.metadata.extras.begin(); it != doc.metadata.extras.end(); ++it)
        meta[it.key()] = it.value();
    if (!meta.empty()) j["metadata"] = std::move(meta);

    if (doc.block) {
        ordered_json blk;
        blk["interval"] = doc.block->interval;
        blk["microbatches_per_block"] = doc.block->microbatches_per_block;
        ordered_json passes = ordered_json::array();
        for (const auto& p : doc.block->passes) {
            ordered_json bp;
            bp["stage"] = p.stage;
            bp["kind"] = pass_name(p.kind);
            bp["microbatch"] = p.microbatch;
            bp["offset"] = p.offset;
            passes.push_back(std::move(bp));
        }
        blk["passes"] = std::move(passes);
        if (doc.has_pattern) {
            ordered_json pat;
            pat["kind"] = doc.pattern.kind == RepeatPattern::Kind::Uniform ? "uniform" : "explicit";
            if (doc.pattern.kind == RepeatPattern::Kind::Explicit) pat["starts"] = doc.pattern.starts;
            blk["pattern"] = std::move(pat);
        }
        j["block"] = std::move(blk);
    }
    for (auto it = doc.extras.begin(); it != doc.extras.end(); ++it) j[it.key()] = it.value();
    return j;
}

inline std::string emit(const ScheduleDocument& doc) { return to_json(doc).dump(2) + "\n"; }

// Parses and validates a document: schema first, then stage placement,
// per-device overlaps (naming device and cell) and dependency closure.
inline ScheduleDocument parse(const std::string& text, bool strict = false) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DocumentError("", std::string("malformed JSON: ") + e.what());
    }
    doc_detail::Cursor root{&j, ""};
    root.need(ordered_json::value_t::object, "object");

    ScheduleDocument doc;
    doc.format_version = static_cast<int>(root.at("format_version").as_int());
    if (doc.format_version != 1)
        root.at("format_version").fail("unsupported format_version " +
                                       std::to_string(doc.format_version));
    doc.units = root.at("units").as_string();
    if (doc.units != "cells" && doc.units != "time")
        root.at("units").fail("units must be 'cells' or 'time'");

    auto topo_c = root.at("topology");
    topo_c.need(ordered_json::value_t::object, "object");
    doc_detail::check_known(topo_c, {"devices", "num_stages", "placement", "stage_mem", "routes"},
                            strict, nullptr);
    Topology& topo = doc.topology;
    topo.devices = static_cast<int>(topo_c.at("devices").as_int());
    topo.num_stages = static_cast<int>(topo_c.at("num_stages").as_int());
    if (topo.devices < 1) topo_c.at("devices").fail("must be positive");
    if (topo.num_stages < 1) topo_c.at("num_stages").fail("must be positive");
    auto placement_c = topo_c.at("placement");
    placement_c.need(ordered_json::value_t::array, "array");
    if (static_cast<int>(placement_c.j->size()) != topo.num_stages)
        placement_c.fail("placement must list one device per stage");
    for (size_t i = 0; i < placement_c.j->size(); ++i) {
        int dev = static_cast<int>(placement_c.item(i).as_int());
        if (dev < 1 || dev > topo.devices) placement_c.item(i).fail("device out of range");
        topo.placement.push_back(dev);
    }
    auto mem_c = topo_c.at("stage_mem");
    mem_c.need(ordered_json::value_t::array, "array");
    if (static_cast<int>(mem_c.j->size()) != topo.num_stages)
        mem_c.fail("stage_mem must list one value per stage");
    for (size_t i = 0; i < mem_c.j->size(); ++i) {
        double m = mem_c.item(i).as_double();
        if (m < 0) mem_c.item(i).fail("must be non-negative");
        topo.stage_mem.push_back(m);
    }
    if (auto routes_c = topo_c.maybe("routes")) {
        routes_c->need(ordered_json::value_t::array, "array");
        for (size_t r = 0; r < routes_c->j->size(); ++r) {
            auto rc = routes_c->item(r);
            rc.need(ordered_json::value_t::array, "array");
            std::vector<int> route;
            for (size_t i = 0; i < rc.j->size(); ++i) {
                int s = static_cast<int>(rc.item(i).as_int());
                if (s < 1 || s > topo.num_stages) rc.item(i).fail("stage out of range");
                route.push_back(s);
            }
            if (route.empty()) rc.fail("route must not be empty");
            topo.routes.push_back(std::move(route));
        }
        if (topo.routes.empty()) routes_c->fail("routes must not be empty");
    } else {
        topo.routes = {Topology::iota_route(1, topo.num_stages)};
    }

    doc.microbatches = static_cast<int>(root.at("microbatches").as_int());
    if (doc.microbatches < 0) root.at("microbatches").fail("must be non-negative");

    auto passes_c = root.at("passes");
    passes_c.need(ordered_json::value_t::array, "array");
    auto parse_pass = [&](const doc_detail::Cursor& pc, auto& out_pass) {
        pc.need(ordered_json::value_t::object, "object");
        doc_detail::check_known(pc, {"device", "stage", "kind", "microbatch", "start", "duration"},
                                strict, nullptr);
        out_pass.device = static_cast<int>(pc.at("device").as_int());
        out_pass.stage = static_cast<int>(pc.at("stage").as_int());
        auto kind = pass_from_name(pc.at("kind").as_string());
        if (!kind) pc.at("kind").fail("kind must be one of F, B, W, BW");
        out_pass.kind = *kind;
        out_pass.microbatch = static_cast<int>(pc.at("microbatch").as_int());
        if (out_pass.stage < 1 || out_pass.stage > topo.num_stages)
            pc.at("stage").fail("stage out of range");
        if (out_pass.device < 1 || out_pass.device > topo.devices)
            pc.at("device").fail("device out of range");
        if (out_pass.microbatch < 0 || out_pass.microbatch >= doc.microbatches)
            pc.at("microbatch").fail("microbatch out of range");
    };
    if (doc.is_grid()) {
        doc.grid.topology = topo;
        doc.grid.microbatches = doc.microbatches;
        for (size_t i = 0; i < passes_c.j->size(); ++i) {
            auto pc = passes_c.item(i);
            GridPass p;
            parse_pass(pc, p);
            p.start = pc.at("start").as_int("integer cell (cells units)");
            p.duration = pc.at("duration").as_int("integer cell count (cells units)");
            if (p.duration < 1) pc.at("duration").fail("must be at least one cell");
            doc.grid.passes.push_back(p);
        }
    } else {
        doc.timed.topology = topo;
        doc.timed.microbatches = doc.microbatches;
        for (size_t i = 0; i < passes_c.j->size(); ++i) {
            auto pc = passes_c.item(i);
            TimedPass p;
            parse_pass(pc, p);
            p.start = pc.at("start").as_double();
            p.duration = pc.at("duration").as_double();
            if (p.duration <= 0) pc.at("duration").fail("must be positive");
            doc.timed.passes.push_back(p);
        }
    }

    if (auto meta_c = root.maybe("metadata")) {
        meta_c->need(ordered_json::value_t::object, "object");
        doc_detail::check_known(*meta_c, {"source_block", "steps", "profile", "replicated_weights"},
                                strict, &doc.metadata.extras);
        if (auto sb = meta_c->maybe("source_block")) doc.metadata.source_block = sb->as_string();
        if (auto steps = meta_c->maybe("steps")) {
            steps->need(ordered_json::value_t::array, "array");
            for (size_t i = 0; i < steps->j->size(); ++i)
                doc.metadata.steps.push_back(steps->item(i).as_string());
        }
        if (auto prof = meta_c->maybe("profile")) {
            prof->need(ordered_json::value_t::object, "object");
            RunTimeProfile p;
            p.f = prof->at("f").as_double();
            p.b = prof->at("b").as_double();
            p.w = prof->at("w").as_double();
            if (auto c = prof->maybe("comm")) p.comm = c->as_double();
            doc.metadata.profile = p;
        }
        if (auto rw = meta_c->maybe("replicated_weights"))
            doc.metadata.replicated_weights = rw->j->is_boolean() && rw->j->get<bool>();
    }

    if (auto blk_c = root.maybe("block")) {
        blk_c->need(ordered_json::value_t::object, "object");
        doc_detail::check_known(*blk_c, {"interval", "microbatches_per_block", "passes", "pattern"},
                                strict, nullptr);
        BuildingBlock blk;
        blk.topology = topo;
        blk.interval = blk_c->at("interval").as_int();
        if (blk.interval < 1) blk_c->at("interval").fail("must be positive");
        blk.microbatches_per_block =
            static_cast<int>(blk_c->at("microbatches_per_block").as_int());
        auto bp_c = blk_c->at("passes");
        bp_c.need(ordered_json::value_t::array, "array");
        for (size_t i = 0; i < bp_c.j->size(); ++i) {
            auto pc = bp_c.item(i);
            pc.need(ordered_json::value_t::object, "object");
            BlockPass p;
            p.stage = static_cast<int>(pc.at("stage").as_int());
            auto kind = pass_from_name(pc.at("kind").as_string());
            if (!kind) pc.at("kind").fail("kind must be one of F, B, W, BW");
            p.kind = *kind;
            p.microbatch = static_cast<int>(pc.at("microbatch").as_int());
            p.offset = pc.at("offset").as_int();
            blk.passes.push_back(p);
        }
        doc.block = std::move(blk);
        if (auto pat_c = blk_c->maybe("pattern")) {
            pat_c->need(ordered_json::value_t::object, "object");
            std::string kind = pat_c->at("kind").as_string();
            if (kind == "uniform") {
                doc.pattern = RepeatPattern::uniform();
            } else if (kind == "explicit") {
                std::vector<long long> starts;
                auto st = pat_c->at("starts");
                st.need(ordered_json::value_t::array, "array");
                for (size_t i = 0; i < st.j->size(); ++i) starts.push_back(st.item(i).as_int());
                doc.pattern = RepeatPattern::explicit_starts(std::move(starts));
            } else {
                pat_c->at("kind").fail("pattern kind must be 'uniform' or 'explicit'");
            }
            doc.has_pattern = true;
        }
    }

    doc_detail::check_known(root,
                            {"format_version", "units", "topology", "microbatches", "passes",
                             "metadata", "block"},
                            strict, &doc.extras);

    // semantic validation: overlaps reported with device and cell, then
    // dependency closure
    auto report_problems = [&](const auto& sched) {
        std::vector<std::vector<std::pair<double, double>>> spans(topo.devices + 1);
        for (const auto& p : sched.passes)
            spans[p.device].push_back({static_cast<double>(p.start),
                                       static_cast<double>(p.start) +
                                           static_cast<double>(p.duration)});
        for (int dev = 1; dev <= topo.devices; ++dev) {
            auto& v = spans[dev];
            std::sort(v.begin(), v.end());
            for (size_t i = 1; i < v.size(); ++i)
                if (v[i].first < v[i - 1].second - 1e-9)
                    throw DocumentError("/passes", "collision on device " + std::to_string(dev) +
                                                       " at cell " +
                                                       std::to_string(v[i].first));
        }
        auto rep = validate_schedule(sched);
        if (!rep.ok()) throw DocumentError("/passes", rep.problems.front());
    };
    if (doc.is_grid())
        report_problems(doc.grid);
    else
        report_problems(doc.timed);
    return doc;
}

inline ScheduleDocument document_from_grid(const GridSchedule& sched) {
    ScheduleDocument doc;
    doc.units = "cells";
    doc.topology = sched.topology;
    doc.microbatches = sched.microbatches;
    doc.grid = sched;
    detail::sort_canonical(doc.grid);
    return doc;
}

inline ScheduleDocument document_from_timed(const TimedSchedule& sched) {
    ScheduleDocument doc;
    doc.units = "time";
    doc.topology = sched.topology;
    doc.microbatches = sched.microbatches;
    doc.timed = sched;
    detail::sort_canonical(doc.timed);
    return doc;
}

}  // namespace pipeblock
