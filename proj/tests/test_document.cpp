#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "pipeblock/document.hpp"
#include "pipeblock/gallery.hpp"
#include "pipeblock/simulate.hpp"

using namespace pipeblock;

namespace {

template <typename Fn>
std::string error_of(Fn&& fn) {
    try {
        fn();
    } catch (const DocumentError& e) {
        return e.what();
    }
    return "";
}

ordered_json pass_json(int device, int stage, const char* kind, int mb, double start,
                       double duration) {
    ordered_json p;
    p["device"] = device;
    p["stage"] = stage;
    p["kind"] = kind;
    p["microbatch"] = mb;
    p["start"] = start;
    p["duration"] = duration;
    return p;
}

// minimal straight-pipeline document shell
ordered_json shell(int devices, int microbatches) {
    ordered_json j;
    j["format_version"] = 1;
    j["units"] = "cells";
    j["topology"]["devices"] = devices;
    j["topology"]["num_stages"] = devices;
    std::vector<int> placement(devices);
    std::vector<double> mem(devices, 1.0);
    for (int i = 0; i < devices; ++i) placement[i] = i + 1;
    j["topology"]["placement"] = placement;
    j["topology"]["stage_mem"] = mem;
    j["microbatches"] = microbatches;
    j["passes"] = ordered_json::array();
    return j;
}

}  // namespace

TEST_CASE("grid documents round trip byte for byte") {
    auto doc = document_from_grid(assemble(build_entry("1f1b", 4), 8));
    doc.metadata.source_block = "1f1b";
    doc.metadata.steps = {"repeat", "squeeze", "reorder"};
    std::string once = emit(doc);
    auto back = parse(once);
    CHECK(emit(back) == once);
    CHECK(back.is_grid());
    CHECK(back.grid.passes == doc.grid.passes);
    CHECK(back.topology == doc.topology);
    CHECK(back.metadata.source_block == doc.metadata.source_block);
    CHECK(back.metadata.steps == doc.metadata.steps);
}

TEST_CASE("timed documents round trip with their profile") {
    RunTimeProfile profile{12.96, 13.22, 9.76, 0.5};
    auto sim = simulate(assemble(build_entry("zb-h1", 4), 8), profile);
    auto doc = document_from_timed(sim.schedule);
    doc.metadata.profile = profile;
    std::string once = emit(doc);
    auto back = parse(once);
    CHECK(emit(back) == once);
    CHECK_FALSE(back.is_grid());
    CHECK(back.timed.passes == doc.timed.passes);
    REQUIRE(back.metadata.profile.has_value());
    CHECK(back.metadata.profile->f == profile.f);
    CHECK(back.metadata.profile->comm == profile.comm);
}

TEST_CASE("v placements and twin routes survive the trip") {
    for (const char* name : {"v-min", "chimera"}) {
        INFO(name);
        auto build = build_entry(name, 4);
        auto doc = document_from_grid(assemble(build, 4 * build.block.microbatches_per_block));
        std::string once = emit(doc);
        auto back = parse(once);
        CHECK(emit(back) == once);
        CHECK(back.topology.routes == doc.topology.routes);
    }
}

TEST_CASE("unknown fields are kept unless parsing is strict") {
    auto doc = document_from_grid(assemble(build_entry("1f1b", 2), 2));
    auto j = ordered_json::parse(emit(doc));
    j["note"] = "hand edited";
    j["metadata"]["mood"] = "fine";
    std::string text = j.dump(2) + "\n";

    auto lax = parse(text);
    CHECK(lax.extras.contains("note"));
    CHECK(lax.metadata.extras.contains("mood"));
    std::string again = emit(lax);
    CHECK(again.find("hand edited") != std::string::npos);
    CHECK(again.find("mood") != std::string::npos);
    CHECK(emit(parse(again)) == again);

    std::string err = error_of([&] { parse(text, true); });
    CHECK(err.find("unknown field") != std::string::npos);
}

TEST_CASE("validation failures name the offence") {
    SECTION("overlap reports device and cell") {
        auto j = shell(1, 2);
        j["passes"].push_back(pass_json(1, 1, "F", 0, 0, 2));
        j["passes"].push_back(pass_json(1, 1, "F", 1, 1, 1));
        std::string err = error_of([&] { parse(j.dump()); });
        CHECK(err.find("collision on device 1 at cell 1") != std::string::npos);
    }
    SECTION("running ahead of a prerequisite") {
        auto j = shell(2, 1);
        j["passes"].push_back(pass_json(1, 1, "F", 0, 0, 1));
        j["passes"].push_back(pass_json(2, 2, "F", 0, 0, 1));
        std::string err = error_of([&] { parse(j.dump()); });
        CHECK(err.find("starts before its prerequisite ends") != std::string::npos);
    }
    SECTION("missing prerequisite") {
        auto j = shell(2, 1);
        j["passes"].push_back(pass_json(2, 2, "F", 0, 1, 1));
        std::string err = error_of([&] { parse(j.dump()); });
        CHECK(err.find("misses F of stage 1") != std::string::npos);
    }
}

TEST_CASE("schema failures point at the field") {
    auto good = shell(1, 1);
    good["passes"].push_back(pass_json(1, 1, "F", 0, 0, 1));
    REQUIRE(error_of([&] { parse(good.dump()); }).empty());

    SECTION("future format") {
        auto j = good;
        j["format_version"] = 2;
        CHECK(error_of([&] { parse(j.dump()); }).find("unsupported format_version 2") !=
              std::string::npos);
    }
    SECTION("fractional cells") {
        auto j = good;
        j["passes"][0]["start"] = 0.5;
        CHECK(error_of([&] { parse(j.dump()); }).find("integer cell") != std::string::npos);
    }
    SECTION("zero width") {
        auto j = good;
        j["passes"][0]["duration"] = 0;
        CHECK(error_of([&] { parse(j.dump()); }).find("at least one cell") != std::string::npos);
    }
    SECTION("unknown kind") {
        auto j = good;
        j["passes"][0]["kind"] = "Q";
        CHECK(error_of([&] { parse(j.dump()); }).find("kind must be one of F, B, W, BW") !=
              std::string::npos);
    }
    SECTION("unknown units") {
        auto j = good;
        j["units"] = "parsecs";
        CHECK(error_of([&] { parse(j.dump()); }).find("units must be 'cells' or 'time'") !=
              std::string::npos);
    }
    SECTION("microbatch out of range") {
        auto j = good;
        j["passes"][0]["microbatch"] = 1;
        CHECK(error_of([&] { parse(j.dump()); }).find("microbatch out of range") !=
              std::string::npos);
    }
    SECTION("placement must cover the stages") {
        auto j = good;
        j["topology"]["placement"] = std::vector<int>{};
        CHECK(error_of([&] { parse(j.dump()); }).find("one device per stage") !=
              std::string::npos);
    }
    SECTION("malformed json") {
        CHECK(error_of([&] { parse("{ not json"); }).find("malformed JSON") != std::string::npos);
    }
}

TEST_CASE("empty schedules are legal documents") {
    auto j = shell(2, 0);
    std::string text = j.dump(2) + "\n";
    auto doc = parse(text);
    CHECK(doc.grid.passes.empty());
    CHECK(emit(parse(emit(doc))) == emit(doc));
}

TEST_CASE("blocks and patterns ride along") {
    auto build = build_entry("v-min", 4);
    auto doc = document_from_grid(assemble(build, 8));
    doc.block = build.block;
    doc.has_pattern = true;

    SECTION("uniform") {
        doc.pattern = RepeatPattern::uniform();
        std::string once = emit(doc);
        auto back = parse(once);
        CHECK(emit(back) == once);
        REQUIRE(back.block.has_value());
        CHECK(back.block->passes == build.block.passes);
        CHECK(back.block->interval == build.block.interval);
        REQUIRE(back.has_pattern);
        CHECK(back.pattern.kind == RepeatPattern::Kind::Uniform);
    }
    SECTION("explicit starts") {
        doc.pattern = RepeatPattern::explicit_starts({0, 7, 9});
        std::string once = emit(doc);
        auto back = parse(once);
        CHECK(emit(back) == once);
        REQUIRE(back.has_pattern);
        CHECK(back.pattern.kind == RepeatPattern::Kind::Explicit);
        CHECK(back.pattern.starts == std::vector<long long>{0, 7, 9});
    }
}
