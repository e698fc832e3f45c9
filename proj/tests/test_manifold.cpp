#include <cmath>
#include <random>

#include <doctest.h>

#include "rggsb/errors.hpp"
#include "rggsb/manifold.hpp"

using namespace rggsb;

namespace {

ChartPoint cp(double a, double b, double c = 0.0) { return ChartPoint{{a, b, c}}; }

ChartPoint random_chart(GeometryKind g, std::mt19937_64& rng, double scale = 1.5) {
    std::normal_distribution<double> normal(0.0, scale);
    ChartPoint p;
    for (int k = 0; k < chart_dim(g); ++k) p.v[k] = normal(rng);
    if (g == GeometryKind::Spherical) {
        double n2 = p.v[0] * p.v[0] + p.v[1] * p.v[1] + p.v[2] * p.v[2];
        if (n2 < 1e-12) p.v[0] = 1.0;
    }
    return p;
}

double chart_distance(const ChartPoint& a, const ChartPoint& b, GeometryKind g) {
    return geodesic_distance(embed_chart(a, g), embed_chart(b, g), g);
}

constexpr GeometryKind kAll[] = {GeometryKind::Euclidean, GeometryKind::Spherical,
                                 GeometryKind::Hyperboloid};

}  // namespace

TEST_SUITE("manifold") {

TEST_CASE("embed_chart matches the chart definitions") {
    auto e = embed_chart(cp(1.5, -2.0), GeometryKind::Euclidean);
    CHECK(e.v[0] == 1.5);
    CHECK(e.v[1] == -2.0);

    auto s = embed_chart(cp(0.0, 0.0, 2.0), GeometryKind::Spherical);
    CHECK(s.v[0] == doctest::Approx(0.0));
    CHECK(s.v[1] == doctest::Approx(0.0));
    CHECK(s.v[2] == doctest::Approx(1.0));

    auto h = embed_chart(cp(0.0, 0.0), GeometryKind::Hyperboloid);
    CHECK(h.v[0] == doctest::Approx(1.0));
    CHECK(h.v[1] == doctest::Approx(0.0));
    CHECK(h.v[2] == doctest::Approx(0.0));
}

TEST_CASE("embed_chart rejects invalid charts") {
    CHECK_THROWS_AS(embed_chart(cp(0.0, 0.0, 0.0), GeometryKind::Spherical), DomainError);
    CHECK_THROWS_AS(embed_chart(cp(std::nan(""), 0.0), GeometryKind::Euclidean), DomainError);
    CHECK_THROWS_AS(embed_chart(cp(1.0, std::numeric_limits<double>::infinity()),
                                GeometryKind::Hyperboloid),
                    DomainError);
}

TEST_CASE("geodesic distance on the stated fixtures") {
    // 3-4-5 triangle
    CHECK(chart_distance(cp(0, 0), cp(3, 4), GeometryKind::Euclidean) == doctest::Approx(5.0));
    // pole to equator
    CHECK(chart_distance(cp(0, 0, 1), cp(1, 0, 0), GeometryKind::Spherical) ==
          doctest::Approx(1.5707963267948966).epsilon(1e-12));
    // Lorentz product of (sqrt2,1,0) and (sqrt2,-1,0): -<a,b>_L = 2+1 = 3
    EmbeddedPoint a{{std::sqrt(2.0), 1.0, 0.0}};
    EmbeddedPoint b{{std::sqrt(2.0), -1.0, 0.0}};
    // frozen from a high-precision acosh evaluation
    CHECK(geodesic_distance(a, b, GeometryKind::Hyperboloid) ==
          doctest::Approx(1.7627471740390861).epsilon(1e-12));
}

TEST_CASE("geodesic distance validates embedding invariants") {
    EmbeddedPoint bad_sphere{{0.0, 0.0, 1.1}};
    EmbeddedPoint ok_sphere{{0.0, 0.0, 1.0}};
    CHECK_THROWS_AS(geodesic_distance(bad_sphere, ok_sphere, GeometryKind::Spherical), DomainError);
    EmbeddedPoint lower_sheet{{-1.0, 0.0, 0.0}};
    EmbeddedPoint apex{{1.0, 0.0, 0.0}};
    CHECK_THROWS_AS(geodesic_distance(lower_sheet, apex, GeometryKind::Hyperboloid), DomainError);
}

TEST_CASE("stable_acosh values and domain") {
    CHECK(stable_acosh(1.0) == 0.0);
    // frozen from sqrt(2e-8)*(1 - 1e-8/12), cross-checked against acosh(1+1e-8)
    CHECK(stable_acosh(1.0 + 1e-8) == doctest::Approx(1.41421356119458375e-4).epsilon(1e-12));
    CHECK(stable_acosh(3.0) == doctest::Approx(1.7627471740390861).epsilon(1e-14));
    CHECK_THROWS_AS(stable_acosh(1.0 - 1e-6), DomainError);
    // slight undershoot from rounding is tolerated
    CHECK(stable_acosh(1.0 - 1e-10) == 0.0);
}

TEST_CASE("stable_acosh is continuous across the shield switch") {
    double eps0 = 1e-7;
    double below = stable_acosh(1.0 + eps0 * (1 - 1e-12));
    double above = stable_acosh(1.0 + eps0 * (1 + 1e-12));
    CHECK(std::fabs(above - below) < 1e-10);
}

TEST_CASE("stable_acosh is monotone on [1, 10]") {
    double prev = stable_acosh(1.0);
    for (int i = 1; i <= 10000; ++i) {
        double s = 1.0 + 9.0 * i / 10000.0;
        double v = stable_acosh(s);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("distance gradients on the stated fixtures") {
    auto g = distance_gradient_chart(cp(0, 0), cp(3, 4), GeometryKind::Euclidean);
    CHECK(g.wrt_a[0] == doctest::Approx(-0.6));
    CHECK(g.wrt_a[1] == doctest::Approx(-0.8));
    CHECK(g.wrt_b[0] == doctest::Approx(0.6));
    CHECK(g.wrt_b[1] == doctest::Approx(0.8));

    auto h = distance_gradient_chart(cp(0.3, -0.7), cp(0.3, -0.7), GeometryKind::Hyperboloid);
    for (int k = 0; k < 2; ++k) {
        CHECK(std::isfinite(h.wrt_a[k]));
        CHECK(std::isfinite(h.wrt_b[k]));
    }
}

TEST_CASE("spherical gradient matches central finite differences") {
    ChartPoint a = cp(0, 0, 2), b = cp(1, 1, 0);
    auto g = distance_gradient_chart(a, b, GeometryKind::Spherical);
    const double step = 1e-6;
    for (int k = 0; k < 3; ++k) {
        ChartPoint ap = a, am = a;
        ap.v[k] += step;
        am.v[k] -= step;
        double fd = (chart_distance(ap, b, GeometryKind::Spherical) -
                     chart_distance(am, b, GeometryKind::Spherical)) /
                    (2 * step);
        CHECK(g.wrt_a[k] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("metric axioms hold on random triples") {
    for (auto g : kAll) {
        std::mt19937_64 rng(42 + static_cast<int>(g));
        for (int t = 0; t < 10000; ++t) {
            auto x = random_chart(g, rng);
            auto y = random_chart(g, rng);
            auto z = random_chart(g, rng);
            auto ex = embed_chart(x, g), ey = embed_chart(y, g), ez = embed_chart(z, g);
            double dxx = geodesic_distance(ex, ex, g);
            double dxy = geodesic_distance(ex, ey, g);
            double dyx = geodesic_distance(ey, ex, g);
            double dxz = geodesic_distance(ex, ez, g);
            double dyz = geodesic_distance(ey, ez, g);
            REQUIRE(dxx <= 1e-9);
            REQUIRE(dxy == dyx);
            REQUIRE(dxz <= dxy + dyz + 1e-9);
            REQUIRE(dxy >= 0.0);
            if (g == GeometryKind::Spherical) REQUIRE(dxy <= 3.14159265358979324 + 1e-12);
            REQUIRE(std::isfinite(dxy));
        }
    }
}

TEST_CASE("embedding invariants hold on random charts") {
    for (auto g : kAll) {
        std::mt19937_64 rng(1234 + static_cast<int>(g));
        for (int t = 0; t < 10000; ++t) {
            auto p = random_chart(g, rng, 3.0);
            auto e = embed_chart(p, g);
            if (g == GeometryKind::Spherical) {
                double n = std::sqrt(e.v[0] * e.v[0] + e.v[1] * e.v[1] + e.v[2] * e.v[2]);
                REQUIRE(std::fabs(n - 1.0) <= 1e-12);
            } else if (g == GeometryKind::Hyperboloid) {
                double q = -e.v[0] * e.v[0] + e.v[1] * e.v[1] + e.v[2] * e.v[2];
                REQUIRE(std::fabs(q + 1.0) <= 1e-9);
                REQUIRE(e.v[0] >= 1.0);
            }
        }
    }
}

TEST_CASE("analytic gradients match finite differences on random pairs") {
    for (auto g : kAll) {
        std::mt19937_64 rng(777 + static_cast<int>(g));
        const double step = 1e-6;
        int checked = 0;
        while (checked < 1000) {
            auto a = random_chart(g, rng);
            auto b = random_chart(g, rng);
            double d = chart_distance(a, b, g);
            if (d < 1e-4) {  // near-singular region: finiteness only
                auto gr = distance_gradient_chart(a, b, g);
                for (int k = 0; k < chart_dim(g); ++k) {
                    REQUIRE(std::isfinite(gr.wrt_a[k]));
                    REQUIRE(std::isfinite(gr.wrt_b[k]));
                }
                continue;
            }
            auto gr = distance_gradient_chart(a, b, g);
            for (int k = 0; k < chart_dim(g); ++k) {
                ChartPoint ap = a, am = a;
                ap.v[k] += step;
                am.v[k] -= step;
                double fd = (chart_distance(ap, b, g) - chart_distance(am, b, g)) / (2 * step);
                double denom = std::max(std::fabs(fd), 1e-8);
                REQUIRE(std::fabs(gr.wrt_a[k] - fd) / denom < 1e-5);

                ChartPoint bp = b, bm = b;
                bp.v[k] += step;
                bm.v[k] -= step;
                fd = (chart_distance(a, bp, g) - chart_distance(a, bm, g)) / (2 * step);
                denom = std::max(std::fabs(fd), 1e-8);
                REQUIRE(std::fabs(gr.wrt_b[k] - fd) / denom < 1e-5);
            }
            ++checked;
        }
    }
}

TEST_CASE("geometry names round-trip") {
    for (auto g : kAll) CHECK(parse_geometry(geometry_name(g)) == g);
    CHECK(!parse_geometry("torus").has_value());
}

}  // TEST_SUITE
