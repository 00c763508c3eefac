#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "pipeblock/gallery.hpp"
#include "pipeblock/render.hpp"

using namespace pipeblock;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

}  // namespace

TEST_CASE("svg output is deterministic and unstamped by default") {
    auto doc = document_from_grid(assemble(build_entry("1f1b", 4), 8));
    doc.metadata.source_block = "1f1b";
    auto svg = render_svg(doc);
    CHECK(svg == render_svg(doc));
    CHECK(svg.find("generated") == std::string::npos);
    CHECK(svg.rfind("<svg ", 0) == 0);
    CHECK(svg.find(">1f1b</text>") != std::string::npos);
    for (int dev = 1; dev <= 4; ++dev) {
        CHECK(svg.find("dev " + std::to_string(dev)) != std::string::npos);
    }

    RenderOptions stamped;
    stamped.stamp = true;
    CHECK(render_svg(doc, stamped).find("<!-- generated ") != std::string::npos);

    RenderOptions titled;
    titled.title = "a<b";
    CHECK(render_svg(doc, titled).find("a&lt;b") != std::string::npos);
}

TEST_CASE("the return leg flips to the dark palette") {
    auto flat = render_svg(document_from_grid(assemble(build_entry("1f1b", 4), 8)));
    CHECK(flat.find("#cfe3f7") != std::string::npos);  // light forward
    CHECK(flat.find("#d8d2ef") != std::string::npos);  // light fused backward
    CHECK(flat.find("#2c5d8f") == std::string::npos);  // a straight pipeline has no return leg
    CHECK(flat.find("#5b4ea0") == std::string::npos);

    auto vee = render_svg(document_from_grid(assemble(build_entry("v-min", 4), 8)));
    CHECK(vee.find("#cfe3f7") != std::string::npos);  // F on the way down
    CHECK(vee.find("#2c5d8f") != std::string::npos);  // F on the way back
    CHECK(vee.find("#fbe3b5") != std::string::npos);  // W light
    CHECK(vee.find("#b07818") != std::string::npos);  // W dark
}

TEST_CASE("highlights outline the chosen passes") {
    auto doc = document_from_grid(assemble(build_entry("1f1b", 2), 2));
    auto plain = render_svg(doc);
    CHECK(plain.find("#d62728") == std::string::npos);

    RenderOptions opts;
    opts.highlight.assign(doc.grid.passes.size(), 0);
    opts.highlight[0] = 1;
    CHECK(render_svg(doc, opts).find("stroke=\"#d62728\"") != std::string::npos);
}

TEST_CASE("ascii rows mirror the grid") {
    auto doc = document_from_grid(assemble(build_entry("1f1b", 4), 8));
    auto text = render_ascii(doc);
    auto lines = lines_of(text);
    REQUIRE(lines.size() == 5);  // four devices plus the legend
    CHECK(lines[0] == "dev  1 |FFFF......DDFDDFDDFDDFDD.DD.DD.DD|");
    CHECK(lines[3] == "dev  4 |...FDDFDDFDDFDDFDDFDDFDDFDD......|");
    CHECK(lines[4].find("legend: F forward") != std::string::npos);
    CHECK(lines[4].find("D fused backward") != std::string::npos);
    CHECK(text.find("\033[") == std::string::npos);
}

TEST_CASE("second-half stages print lowercase") {
    auto text = render_ascii(document_from_grid(assemble(build_entry("v-min", 4), 8)));
    CHECK(text.find('F') != std::string::npos);
    CHECK(text.find('f') != std::string::npos);
    CHECK(text.find('W') != std::string::npos);
    CHECK(text.find('w') != std::string::npos);
    CHECK(text.find("lowercase marks second-half stages") != std::string::npos);
}

TEST_CASE("wide schedules downsample with a note") {
    auto doc = document_from_grid(assemble(build_entry("1f1b", 4), 8));
    RenderOptions opts;
    opts.ascii_max_width = 20;
    auto text = render_ascii(doc, opts);
    auto lines = lines_of(text);
    REQUIRE(lines.size() == 6);  // note line joins in
    CHECK(lines[0].size() == std::string("dev  1 |").size() + 20 + 1);
    CHECK(lines[5].find("wider than 20 columns") != std::string::npos);
    CHECK(lines[5].find("each column covers about") != std::string::npos);
}

TEST_CASE("color escapes appear only on request") {
    auto doc = document_from_grid(assemble(build_entry("v-min", 4), 8));
    RenderOptions opts;
    opts.ascii_color = true;
    auto colored = render_ascii(doc, opts);
    CHECK(colored.find("\033[36m") != std::string::npos);        // forward
    CHECK(colored.find("\033[7;36m") != std::string::npos);      // inverted second half
    CHECK(render_ascii(doc).find("\033[") == std::string::npos);
}

TEST_CASE("an empty document renders as such") {
    GridSchedule empty;
    empty.topology = Topology::straight(2);
    CHECK(render_ascii(document_from_grid(empty)) == "(empty schedule)\n");
}
