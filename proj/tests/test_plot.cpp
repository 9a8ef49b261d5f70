#include "doctest.h"

#include <regex>

#include "streamnet/plot.hpp"
#include "streamnet/tensor.hpp"

using namespace streamnet;

namespace {

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
    return n;
}

// Tags open and close in nesting order (self-closing tags ignored).
bool balanced(const std::string& svg) {
    std::vector<std::string> stack;
    const std::regex tag(R"(<(/?)([a-zA-Z]+)[^>]*?(/?)>)");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), tag); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        if (m[3] == "/") continue;
        if (m[1] == "/") {
            if (stack.empty() || stack.back() != m[2]) return false;
            stack.pop_back();
        } else {
            stack.push_back(m[2]);
        }
    }
    return stack.empty();
}

} // namespace

TEST_CASE("line chart") {
    CHECK_THROWS_AS(line_chart_svg({}), Error);
    std::vector<Series> s{{"noise_05_1", {{0, 0.1}, {1, 0.3}, {2, 0.35}}},
                          {"noise_05_5 <&>", {{0, 0.1}, {1, 0.5}, {2, 0.6}, {3, 0.62}}}};
    const std::string svg = line_chart_svg(s, ChartOptions{"Noise \"0.5\""});
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(count_of(svg, "<polyline") == 2);
    CHECK(balanced(svg));
    CHECK(svg.find("noise_05_5 &lt;&amp;&gt;") != std::string::npos);
    CHECK(svg.find("Noise &quot;0.5&quot;") != std::string::npos);
    // One coordinate pair per point.
    const std::regex pts(R"re(points="([^"]*)")re");
    std::vector<std::size_t> sizes;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), pts); it != std::sregex_iterator(); ++it)
        sizes.push_back(count_of((*it)[1].str(), ","));
    CHECK(sizes == std::vector<std::size_t>{3, 4});
}

TEST_CASE("histogram chart") {
    CHECK_THROWS_AS(histogram_svg({}), Error);
    const std::string svg = histogram_svg({{"a", {0, 1, 2}, {3, 5}}, {"b", {0, 1, 2}, {1, 0}}});
    CHECK(balanced(svg));
    CHECK(count_of(svg, "<rect") >= 4);
}

TEST_CASE("xml escaping and tags from file stems") {
    CHECK(xml_escape("a<b & 'c' > \"d\"") == "a&lt;b &amp; &apos;c&apos; &gt; &quot;d&quot;");
    CHECK(tag_from_stem("synthetic_noise_05_5_0") == "noise_05_5");
    CHECK(tag_from_stem("cifar10_noise_09_1_v5x5_12") == "noise_09_1_v5x5");
    CHECK(tag_from_stem("whatever") == "whatever");
}
