#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>

#include "dynreg/errors.hpp"
#include "dynreg/kdtree.hpp"

using namespace dynreg;

namespace {

std::mt19937_64 rng(7771);

double uniform(double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

PointCloud random_cloud(int n, double extent) {
    PointCloud c;
    for (int i = 0; i < n; ++i) {
        c.points.emplace_back(uniform(-extent, extent), uniform(-extent, extent),
                              uniform(-extent, extent));
    }
    return c;
}

KdIndex::Hit linear_scan(const PointCloud& cloud, const Point3& q) {
    KdIndex::Hit best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double d = (cloud.points[i] - q).norm();
        if (d < best.distance) {
            best.distance = d;
            best.index = i;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("nearest matches a linear scan on 10^4 queries") {
    const PointCloud cloud = random_cloud(3000, 25.0);
    const KdIndex index(cloud);
    REQUIRE(index.size() == cloud.size());
    for (int k = 0; k < 10000; ++k) {
        const Point3 q(uniform(-30, 30), uniform(-30, 30), uniform(-30, 30));
        const auto expected = linear_scan(cloud, q);
        const auto got = index.nearest(q);
        CHECK(got.index == expected.index);
        CHECK(got.distance == doctest::Approx(expected.distance).epsilon(1e-12));
    }
}

TEST_CASE("querying a stored point returns it at distance zero") {
    const PointCloud cloud = random_cloud(500, 10.0);
    const KdIndex index(cloud);
    for (std::size_t i = 0; i < cloud.size(); i += 7) {
        const auto hit = index.nearest(cloud.points[i]);
        CHECK(hit.distance == 0.0);
        CHECK((cloud.points[hit.index] - cloud.points[i]).norm() == 0.0);
    }
}

TEST_CASE("exact-distance ties resolve to the smallest index") {
    PointCloud cloud;
    cloud.points = {{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
    const KdIndex index(cloud);
    const auto hit = index.nearest({1.0, 0.0, 0.0});
    CHECK(hit.index == 0);  // duplicate at index 2 loses the tie
    const auto mid = index.nearest({0.0, 0.0, 0.0});
    CHECK(mid.index == 0);  // indices 0 and 1 are equidistant
}

TEST_CASE("single-point tree answers every query with that point") {
    PointCloud cloud;
    cloud.points = {{3.0, -2.0, 1.0}};
    const KdIndex index(cloud);
    for (int k = 0; k < 50; ++k) {
        const Point3 q(uniform(-10, 10), uniform(-10, 10), uniform(-10, 10));
        const auto hit = index.nearest(q);
        CHECK(hit.index == 0);
        CHECK(hit.distance == doctest::Approx((q - cloud.points[0]).norm()));
    }
}

TEST_CASE("empty index reports emptiness and rejects queries") {
    const KdIndex index;
    CHECK(index.empty());
    CHECK_THROWS_AS(index.nearest({0, 0, 0}), EmptyIndexError);
}

TEST_CASE("degenerate layouts still match the oracle") {
    SUBCASE("all points collinear") {
        PointCloud cloud;
        for (int i = 0; i < 200; ++i) cloud.points.emplace_back(i * 0.1, 0.0, 0.0);
        const KdIndex index(cloud);
        for (int k = 0; k < 500; ++k) {
            const Point3 q(uniform(-5, 25), uniform(-1, 1), uniform(-1, 1));
            CHECK(index.nearest(q).index == linear_scan(cloud, q).index);
        }
    }
    SUBCASE("many duplicates") {
        PointCloud cloud;
        for (int i = 0; i < 300; ++i) {
            cloud.points.emplace_back(i % 3, (i / 3) % 3, 0.0);
        }
        const KdIndex index(cloud);
        for (int k = 0; k < 500; ++k) {
            const Point3 q(uniform(-1, 4), uniform(-1, 4), uniform(-1, 1));
            const auto got = index.nearest(q);
            const auto want = linear_scan(cloud, q);
            CHECK(got.distance == doctest::Approx(want.distance).epsilon(1e-12));
            CHECK(got.index == want.index);  // tie rule: smallest index
        }
    }
}
