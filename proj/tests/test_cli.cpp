#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pipeblock/cli.hpp"

using namespace pipeblock;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(std::move(args), out, err, in);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("gallery lists every entry") {
    auto r = run({"gallery"});
    REQUIRE(r.code == 0);
    for (const auto& info : gallery()) CHECK(r.out.find(info.name) != std::string::npos);

    auto sized = run({"gallery", "--devices", "4"});
    REQUIRE(sized.code == 0);
    CHECK(sized.out.find("peak bound") != std::string::npos);
    CHECK(sized.out.find("d=4:") != std::string::npos);
}

TEST_CASE("build, assemble and simulate chain through pipes") {
    auto built = run({"build", "--block", "1f1b", "--devices", "4"});
    REQUIRE(built.code == 0);
    auto block_doc = parse(built.out);
    REQUIRE(block_doc.block.has_value());
    CHECK(block_doc.metadata.source_block == "1f1b");

    auto assembled = run({"assemble", "-", "--microbatches", "8"}, built.out);
    REQUIRE(assembled.code == 0);
    CHECK(assembled.err.find("assembled 1f1b") != std::string::npos);
    CHECK(assembled.err.find("makespan=33 cells") != std::string::npos);
    auto sched_doc = parse(assembled.out);
    CHECK(sched_doc.grid.passes.size() == 64);

    auto simulated = run({"simulate", "-"}, assembled.out);
    REQUIRE(simulated.code == 0);
    CHECK(simulated.out.find("makespan: 33") != std::string::npos);
    CHECK(simulated.out.find("bubble rate: 27.27%") != std::string::npos);
    CHECK(simulated.out.find("peak memory: 4 m") != std::string::npos);
    CHECK(simulated.out.find("idle-in-span") != std::string::npos);
}

TEST_CASE("assemble honours the tightening flags") {
    auto built = run({"build", "--block", "v-min", "--devices", "4"});
    REQUIRE(built.code == 0);

    auto laid = run({"assemble", "-", "--microbatches", "16", "--no-squeeze", "--no-reorder"},
                    built.out);
    REQUIRE(laid.code == 0);
    CHECK(laid.err.find("makespan=108 cells") != std::string::npos);

    auto squeezed = run({"assemble", "-", "--microbatches", "16", "--no-reorder"}, built.out);
    REQUIRE(squeezed.code == 0);
    CHECK(squeezed.err.find("makespan=107 cells") != std::string::npos);

    auto direct = run({"assemble", "--block", "v-min", "--devices", "4", "--microbatches", "16",
                       "--no-reorder"});
    REQUIRE(direct.code == 0);
    CHECK(direct.out == squeezed.out);
}

TEST_CASE("explicit patterns assemble only at their recorded width") {
    auto built = run({"build", "--block", "interleaved-1f1b", "--devices", "4"});
    REQUIRE(built.code == 0);

    auto fits = run({"assemble", "-", "--microbatches", "4"}, built.out);
    CHECK(fits.code == 0);

    auto wrong = run({"assemble", "-", "--microbatches", "8"}, built.out);
    CHECK(wrong.code == 1);
    CHECK(wrong.err.find("explicit repeat pattern covers 4 instances") != std::string::npos);

    auto rebuilt = run({"assemble", "--block", "interleaved-1f1b", "--devices", "4",
                        "--microbatches", "8"});
    CHECK(rebuilt.code == 0);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"no-such-command"}).code == 2);
    CHECK(run({"assemble", "-"}).code == 2);                // missing --microbatches
    CHECK(run({"search", "--devices", "4"}).code == 2);     // missing --mem-limit
    CHECK(run({"build", "--block", "1f1b"}).code == 2);     // missing --devices
}

TEST_CASE("domain errors exit with 1") {
    auto bad_entry = run({"build", "--block", "nope", "--devices", "4"});
    CHECK(bad_entry.code == 1);
    CHECK(bad_entry.err.find("error:") != std::string::npos);

    auto empty = run({"simulate", "-"},
                     emit(document_from_grid(GridSchedule{Topology::straight(2), 0, {}})));
    CHECK(empty.code == 1);
    CHECK(empty.err.find("no passes") != std::string::npos);

    auto starved = run({"search", "--devices", "4", "--mem-limit", "3.9m", "--delta-max", "3",
                        "--tau-max", "3"});
    CHECK(starved.code == 1);
    CHECK(starved.out.find("no schedule fits") != std::string::npos);
    CHECK(starved.err.find("search infeasible") != std::string::npos);

    auto built = run({"build", "--block", "1f1b", "--devices", "4"});
    auto j = ordered_json::parse(built.out);
    j["surprise"] = true;
    auto strict = run({"render", "-", "--strict"}, j.dump());
    CHECK(strict.code == 1);
    CHECK(strict.err.find("unknown field") != std::string::npos);

    auto bad_param = run({"build", "--block", "gpipe", "--devices", "4", "--param", "bogus=3"});
    CHECK(bad_param.code == 1);
}

TEST_CASE("search prints the winner and can save it") {
    std::string path = "cli_test_search_out.json";
    auto r = run({"search", "--devices", "4", "--mem-limit", "0.5M", "--delta-max", "3",
                  "--tau-max", "3", "--out", path});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("scanned") != std::string::npos);
    CHECK(r.out.find("(0.5 M)") != std::string::npos);
    CHECK(r.out.find("best: K=") != std::string::npos);
    CHECK(r.out.find("bubble rate:") != std::string::npos);
    CHECK(r.out.find("wrote " + path) != std::string::npos);

    auto doc = parse(slurp_file(path));
    CHECK(doc.block.has_value());
    CHECK(doc.metadata.source_block == "search-best");
    std::remove(path.c_str());
}

TEST_CASE("frontier sweeps limits in both formats") {
    auto csv = run({"frontier", "--devices", "4", "--limits", "3.5m,0.5M,1M", "--delta-max", "3",
                    "--tau-max", "3", "--csv"});
    REQUIRE(csv.code == 0);
    CHECK(csv.out.rfind("limit_m,limit_M,feasible,bubble_rate,peak_m\n", 0) == 0);
    CHECK(csv.out.find("3.5,0.4375,0,1,0") != std::string::npos);
    CHECK(csv.out.find("\n4,0.5,1,") != std::string::npos);
    CHECK(csv.out.find("\n8,1,1,") != std::string::npos);

    auto table = run({"frontier", "--devices", "4", "--limits", "3.5m,1M", "--delta-max", "3",
                      "--tau-max", "3"});
    REQUIRE(table.code == 0);
    CHECK(table.out.find("limit(m)") != std::string::npos);
    CHECK(table.out.find("no") != std::string::npos);
    CHECK(table.out.find("yes") != std::string::npos);
    CHECK(table.out.find("K=") != std::string::npos);
}

TEST_CASE("render draws text by default and svg on request") {
    auto built = run({"build", "--block", "v-min", "--devices", "4"});
    auto assembled = run({"assemble", "-", "--microbatches", "8"}, built.out);
    REQUIRE(assembled.code == 0);

    auto text = run({"render", "-"}, assembled.out);
    REQUIRE(text.code == 0);
    CHECK(text.out.find("dev  1 |") != std::string::npos);
    CHECK(text.out.find("legend:") != std::string::npos);
    CHECK(text.out.find("\033[") == std::string::npos);

    auto svg = run({"render", "-", "--svg", "-"}, assembled.out);
    REQUIRE(svg.code == 0);
    CHECK(svg.out.rfind("<svg ", 0) == 0);

    std::string path = "cli_test_render.svg";
    auto saved = run({"render", "-", "--svg", path, "--text"}, assembled.out);
    REQUIRE(saved.code == 0);
    CHECK(saved.out.find("wrote " + path) != std::string::npos);
    CHECK(saved.out.find("legend:") != std::string::npos);
    CHECK(slurp_file(path).rfind("<svg ", 0) == 0);
    std::remove(path.c_str());

    auto narrow = run({"render", "-", "--max-width", "20"}, assembled.out);
    CHECK(narrow.out.find("wider than 20 columns") != std::string::npos);

    setenv("PIPEBLOCK_COLOR", "always", 1);
    auto colored = run({"render", "-"}, assembled.out);
    CHECK(colored.out.find("\033[") != std::string::npos);
    setenv("PIPEBLOCK_COLOR", "never", 1);
    auto plain = run({"render", "-"}, assembled.out);
    CHECK(plain.out.find("\033[") == std::string::npos);
    unsetenv("PIPEBLOCK_COLOR");
}

TEST_CASE("analyze reports memory and growth") {
    auto built = run({"build", "--block", "v-min", "--devices", "4"});
    auto r = run({"analyze", "-", "--lifespans", "--witness"}, built.out);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("lifespan memory bound per device (m)") != std::string::npos);
    CHECK(r.out.find("growth per period:") != std::string::npos);
    CHECK(r.out.find("repeating bubble:") != std::string::npos);
    CHECK(r.out.find("stays bounded by warm-up and cool-down") != std::string::npos);
    CHECK(r.out.find("stage 1 slot 0:") != std::string::npos);
    CHECK(r.out.find("witness chain:") != std::string::npos);

    auto assembled = run({"assemble", "--block", "1f1b", "--devices", "4", "--microbatches", "8"});
    auto j = ordered_json::parse(assembled.out);
    j.erase("block");
    auto bare = run({"analyze", "-"}, j.dump());
    REQUIRE(bare.code == 0);
    CHECK(bare.out.find("no block section") != std::string::npos);

    auto shrunk = run({"analyze", "-", "--tw", "0.2"}, built.out);
    REQUIRE(shrunk.code == 0);
    CHECK(shrunk.out.find("grows with the microbatch count") != std::string::npos);
}

TEST_CASE("compare tabulates entries and failures") {
    auto table =
        run({"compare", "--blocks", "1f1b,zb-h1,nope", "--devices", "4", "--microbatches", "8"});
    REQUIRE(table.code == 0);
    CHECK(table.out.find("| block | makespan | bubble | peak (m) |") != std::string::npos);
    CHECK(table.out.find("| 1f1b | 33 | 27.27% | 4 |") != std::string::npos);
    CHECK(table.out.find("| nope | error:") != std::string::npos);

    auto csv = run({"compare", "--blocks", "1f1b", "--devices", "4", "--microbatches", "8",
                    "--csv"});
    REQUIRE(csv.code == 0);
    CHECK(csv.out.rfind("block,makespan,bubble_rate,peak_m,error\n", 0) == 0);
    CHECK(csv.out.find("1f1b,33,") != std::string::npos);
}
