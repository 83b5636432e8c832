#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mainrisk/geo.hpp"

using namespace mainrisk;
using geo::Point2;
using geo::Polyline;

namespace {

/// Independent membership oracle: walks the main at a fixed resolution and
/// accumulates the length of sample intervals whose midpoint lies inside
/// the buffer. Never shares code with overlap_length.
double sampling_overlap_oracle(const Polyline& main, const Polyline& street,
                               double halfwidth, double step = 0.01) {
    double covered = 0.0;
    const auto& v = main.vertices();
    for (size_t i = 0; i + 1 < v.size(); ++i) {
        const double len = geo::distance(v[i], v[i + 1]);
        const long n = std::max(1L, std::lround(std::ceil(len / step)));
        for (long j = 0; j < n; ++j) {
            const double t = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
            const Point2 p{v[i].x + t * (v[i + 1].x - v[i].x),
                           v[i].y + t * (v[i + 1].y - v[i].y)};
            if (geo::point_to_polyline_distance(p, street) <= halfwidth) {
                covered += len / static_cast<double>(n);
            }
        }
    }
    return covered;
}

Polyline random_polyline(std::mt19937_64& rng, int min_vertices,
                         int max_vertices, double span) {
    std::uniform_real_distribution<double> coord(0.0, span);
    std::uniform_int_distribution<int> n_vertices(min_vertices, max_vertices);
    const int n = n_vertices(rng);
    std::vector<Point2> pts;
    pts.push_back({coord(rng), coord(rng)});
    while (static_cast<int>(pts.size()) < n) {
        Point2 next{coord(rng), coord(rng)};
        if (geo::distance(pts.back(), next) > 1.0) {
            pts.push_back(next);
        }
    }
    return Polyline(pts);
}

Polyline translated(const Polyline& line, double dx, double dy) {
    std::vector<Point2> pts;
    for (const auto& p : line.vertices()) {
        pts.push_back({p.x + dx, p.y + dy});
    }
    return Polyline(pts);
}

}  // namespace

TEST_CASE("polyline validation") {
    CHECK_THROWS_AS(Polyline({{0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(Polyline({{0, 0}, {0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(Polyline({{0, 0}, {1, 0}, {1, 0}}), std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(Polyline({{0, 0}, {inf, 0}}), std::invalid_argument);
    CHECK_NOTHROW(Polyline({{0, 0}, {1, 0}}));
}

TEST_CASE("point to polyline distance") {
    const Polyline line({{-10, 0}, {10, 0}});
    CHECK(geo::point_to_polyline_distance({0, 5}, line) == 5.0);
    CHECK(geo::point_to_polyline_distance({-10, 0}, line) == 0.0);

    // Past the endpoint the nearest point is the vertex itself.
    const double d = geo::point_to_polyline_distance({15, 5}, line);
    CHECK(d == Catch::Approx(std::sqrt(50.0)).epsilon(1e-12));

    // Dense sampling of the segment can only do worse.
    double best = 1e300;
    for (int i = 0; i <= 200000; ++i) {
        const double x = -10.0 + 20.0 * i / 200000.0;
        best = std::min(best, std::hypot(15.0 - x, 5.0));
    }
    CHECK(d <= best + 1e-9);
    CHECK(d == Catch::Approx(best).epsilon(1e-6));
}

TEST_CASE("polyline length") {
    CHECK(geo::polyline_length(Polyline({{0, 0}, {3, 4}})) == 5.0);
    CHECK(geo::polyline_length(Polyline({{0, 0}, {1, 0}, {1, 1}})) == 2.0);

    std::mt19937_64 rng(11);
    const auto line = random_polyline(rng, 10, 10, 400.0);
    double expected = 0.0;
    const auto& v = line.vertices();
    for (size_t i = 0; i + 1 < v.size(); ++i) {
        expected += std::hypot(v[i + 1].x - v[i].x, v[i + 1].y - v[i].y);
    }
    CHECK(geo::polyline_length(line) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("overlap_length basic cases") {
    const Polyline street({{-100, 0}, {100, 0}});

    // Entirely inside the buffer.
    const Polyline inside({{-50, 10}, {50, 10}});
    CHECK(geo::overlap_length(inside, street, 25.0) ==
          Catch::Approx(geo::polyline_length(inside)).margin(1e-9));

    // Parallel at twice the halfwidth: fully outside.
    const Polyline outside({{-50, 50}, {50, 50}});
    CHECK(geo::overlap_length(outside, street, 25.0) == 0.0);

    // Perpendicular crossing cuts a chord of exactly 2w.
    const Polyline crossing({{0, -60}, {0, 60}});
    const double w = 25.0;
    const double ov = geo::overlap_length(crossing, street, w);
    CHECK(ov == Catch::Approx(2 * w).margin(0.1));
    CHECK(ov == Catch::Approx(sampling_overlap_oracle(crossing, street, w))
                    .margin(0.1));
}

TEST_CASE("overlap_length agrees with the sampling oracle") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> width(10.0, 40.0);
    for (int trial = 0; trial < 25; ++trial) {
        const auto street = random_polyline(rng, 2, 4, 300.0);
        const auto main = random_polyline(rng, 2, 5, 300.0);
        const double w = width(rng);
        const double fast = geo::overlap_length(main, street, w);
        const double oracle = sampling_overlap_oracle(main, street, w);
        INFO("trial " << trial << " w=" << w);
        CHECK(fast == Catch::Approx(oracle).margin(0.1));
        CHECK(fast <= geo::polyline_length(main) + 1e-9);
    }
}

TEST_CASE("overlap_length is monotone in halfwidth") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto street = random_polyline(rng, 2, 3, 200.0);
        const auto main = random_polyline(rng, 2, 4, 200.0);
        double prev = 0.0;
        for (const double w : {5.0, 15.0, 30.0, 60.0, 120.0}) {
            const double ov = geo::overlap_length(main, street, w);
            CHECK(ov >= prev - 1e-6);
            prev = ov;
        }
    }
}

TEST_CASE("geometry is translation invariant") {
    std::mt19937_64 rng(31);
    const auto street = random_polyline(rng, 2, 4, 300.0);
    const auto main = random_polyline(rng, 2, 4, 300.0);
    const double dx = 1234.5, dy = -987.25;

    const double before = geo::overlap_length(main, street, 25.0);
    const double after = geo::overlap_length(translated(main, dx, dy),
                                             translated(street, dx, dy), 25.0);
    CHECK(after == Catch::Approx(before).margin(1e-6));

    const Point2 p{80.0, 40.0};
    CHECK(geo::point_to_polyline_distance({p.x + dx, p.y + dy},
                                          translated(street, dx, dy)) ==
          Catch::Approx(geo::point_to_polyline_distance(p, street))
              .margin(1e-9));
    CHECK(geo::polyline_length(translated(main, dx, dy)) ==
          Catch::Approx(geo::polyline_length(main)).margin(1e-9));
}

TEST_CASE("assign_mains_to_blocks picks the maximal overlap") {
    // Block 1's street covers 120 ft of the main, block 2's only ~30.
    const Polyline main({{0, 5}, {150, 5}});
    const std::vector<std::pair<geo::BlockId, Polyline>> blocks = {
        {1, Polyline({{0, 0}, {120, 0}})},
        {2, Polyline({{120, 0}, {150, 0}})},
    };
    const auto res = geo::assign_mains_to_blocks({{"m1", main}}, blocks, 25.0);
    REQUIRE(res.assigned.size() == 1);
    CHECK(res.assigned[0] == std::pair<std::string, geo::BlockId>{"m1", 1});
    CHECK(res.unmapped.empty());
}

TEST_CASE("assign_mains_to_blocks reports unmapped mains") {
    const Polyline main({{0, 500}, {100, 500}});
    const std::vector<std::pair<geo::BlockId, Polyline>> blocks = {
        {1, Polyline({{0, 0}, {100, 0}})},
    };
    const auto res = geo::assign_mains_to_blocks({{"far", main}}, blocks, 25.0);
    CHECK(res.assigned.empty());
    REQUIRE(res.unmapped.size() == 1);
    CHECK(res.unmapped[0] == "far");
}

TEST_CASE("assign_mains_to_blocks breaks exact ties toward the smaller id") {
    // Identical street geometry for both blocks: overlap is exactly equal.
    const Polyline street({{0, 0}, {100, 0}});
    const Polyline main({{0, 5}, {100, 5}});
    const std::vector<std::pair<geo::BlockId, Polyline>> blocks = {
        {42, street},
        {17, street},
    };
    const auto res = geo::assign_mains_to_blocks({{"m", main}}, blocks, 25.0);
    REQUIRE(res.assigned.size() == 1);
    CHECK(res.assigned[0].second == 17);
}

TEST_CASE("assign_mains_to_blocks is order independent") {
    std::mt19937_64 rng(41);
    std::vector<std::pair<geo::BlockId, Polyline>> blocks;
    for (int i = 0; i < 6; ++i) {
        blocks.emplace_back(i + 1,
                            Polyline({{i * 120.0, 0.0}, {i * 120.0 + 120.0, 0.0}}));
    }
    std::vector<std::pair<std::string, Polyline>> mains;
    std::uniform_real_distribution<double> start(0.0, 600.0);
    for (int i = 0; i < 12; ++i) {
        const double x = start(rng);
        mains.emplace_back("m" + std::to_string(i),
                           Polyline({{x, 6.0}, {x + 90.0, 6.0}}));
    }
    const auto base = geo::assign_mains_to_blocks(mains, blocks, 25.0);

    auto shuffled_mains = mains;
    auto shuffled_blocks = blocks;
    std::shuffle(shuffled_mains.begin(), shuffled_mains.end(), rng);
    std::shuffle(shuffled_blocks.begin(), shuffled_blocks.end(), rng);
    const auto shuffled =
        geo::assign_mains_to_blocks(shuffled_mains, shuffled_blocks, 25.0);
    CHECK(base.assigned == shuffled.assigned);
    CHECK(base.unmapped == shuffled.unmapped);
}

TEST_CASE("assign_mains_to_blocks requires blocks") {
    CHECK_THROWS_AS(
        geo::assign_mains_to_blocks({{"m", Polyline({{0, 0}, {1, 0}})}}, {}, 25.0),
        std::invalid_argument);
}

TEST_CASE("breaks_within_radius") {
    const Polyline line({{0, 0}, {100, 0}});

    CHECK(geo::breaks_within_radius({{"a", {50, 50}}}, line, 100.0, {}) == 1);
    CHECK(geo::breaks_within_radius({{"a", {50, 150}}}, line, 100.0, {}) == 0);

    // Boundary distance counts as inside (closed ball).
    CHECK(geo::breaks_within_radius({{"a", {50, 100}}}, line, 100.0, {}) == 1);

    // Excluded ids are skipped.
    CHECK(geo::breaks_within_radius({{"a", {50, 50}}, {"b", {60, 10}}}, line,
                                    100.0, {"a"}) == 1);
}

TEST_CASE("breaks_within_radius matches a brute-force distance oracle") {
    std::mt19937_64 rng(53);
    const auto line = random_polyline(rng, 2, 5, 200.0);
    std::uniform_real_distribution<double> coord(-100.0, 300.0);
    std::vector<std::pair<std::string, Point2>> events;
    for (int i = 0; i < 20; ++i) {
        events.emplace_back("e" + std::to_string(i),
                            Point2{coord(rng), coord(rng)});
    }
    const double radius = 80.0;
    int expected = 0;
    for (const auto& [id, p] : events) {
        double best = 1e300;
        const auto& v = line.vertices();
        for (size_t i = 0; i + 1 < v.size(); ++i) {
            best = std::min(best, geo::point_segment_distance(p, v[i], v[i + 1]));
        }
        if (best <= radius) {
            ++expected;
        }
    }
    CHECK(geo::breaks_within_radius(events, line, radius, {}) == expected);
}
