#include <gtest/gtest.h>

#include "futvol/svg.hpp"

using namespace futvol;

namespace {

svg::Chart chart() {
    svg::Chart c;
    c.title = "err <vs> eps & delta";
    c.x_label = "eps + delta";
    c.y_label = "abs error";
    c.log_x = c.log_y = true;
    c.series.push_back({"measured", {0.5, 0.1, 0.02}, {0.26, 0.049, 0.0092}, false, svg::palette(0)});
    c.series.push_back({"slope 1", {0.5, 0.02}, {0.25, 0.01}, true, svg::palette(1)});
    return c;
}

}  // namespace

TEST(Svg, DeterministicAndWellFormed) {
    const std::string a = svg::render(chart());
    EXPECT_EQ(a, svg::render(chart()));
    EXPECT_EQ(a.rfind("<svg", 0), 0u);
    EXPECT_NE(a.find("</svg>"), std::string::npos);
    EXPECT_NE(a.find("err &lt;vs&gt; eps &amp; delta"), std::string::npos);
    EXPECT_EQ(a.find("<vs>"), std::string::npos);
    EXPECT_NE(a.find("<polyline"), std::string::npos);
    EXPECT_NE(a.find("<circle"), std::string::npos);
}

TEST(Svg, SkipsNonPositiveOnLogAxes) {
    auto c = chart();
    c.series[0].y[1] = 0.0;
    const std::string s = svg::render(c);
    std::size_t circles = 0;
    for (auto p = s.find("<circle"); p != std::string::npos; p = s.find("<circle", p + 1)) ++circles;
    EXPECT_EQ(circles, 2u);
}

TEST(Svg, EmptyAndFlatData) {
    svg::Chart c;
    EXPECT_NE(svg::render(c).find("</svg>"), std::string::npos);
    c.series.push_back({"flat", {1, 2, 3}, {0.2, 0.2, 0.2}});
    EXPECT_NE(svg::render(c).find("<polyline"), std::string::npos);
}
