#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <doctest.h>

#include "rggsb/data_io.hpp"
#include "rggsb/errors.hpp"

using namespace rggsb;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

double block_density(const DyadData& d, const std::vector<int>& labels, int la, int lb) {
    std::size_t edges = 0, pairs = 0;
    for (int i = 0; i < d.n_nodes; ++i)
        for (int j = i + 1; j < d.n_nodes; ++j) {
            bool match = (labels[i] == la && labels[j] == lb) || (labels[i] == lb && labels[j] == la);
            if (!match) continue;
            ++pairs;
            edges += d.labels[dyad_index(i, j, d.n_nodes)];
        }
    return static_cast<double>(edges) / static_cast<double>(pairs);
}

}  // namespace

TEST_SUITE("data_io") {

TEST_CASE("hard RGG extremes: complete and empty graphs") {
    auto big = generate_hard_rgg(GeometryKind::Euclidean, 20, 1e6, 3);
    CHECK(big.data.edge_count() == dyad_count(20));
    auto tiny = generate_hard_rgg(GeometryKind::Euclidean, 20, 1e-12, 3);
    CHECK(tiny.data.edge_count() == 0);
}

TEST_CASE("hard RGG edges agree with an independent pairwise-distance pass") {
    auto g = generate_hard_rgg(GeometryKind::Spherical, 50, M_PI / 4, 11);
    REQUIRE(g.pos_dim == 3);
    std::size_t below = 0;
    for (int i = 0; i < 50; ++i)
        for (int j = i + 1; j < 50; ++j) {
            const double* a = &g.positions[3 * i];
            const double* b = &g.positions[3 * j];
            double cx = a[1] * b[2] - a[2] * b[1];
            double cy = a[2] * b[0] - a[0] * b[2];
            double cz = a[0] * b[1] - a[1] * b[0];
            double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
            double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            double d = std::atan2(cross, dot);
            bool edge = d < M_PI / 4;
            if (edge) ++below;
            CHECK(static_cast<bool>(g.data.labels[dyad_index(i, j, 50)]) == edge);
        }
    CHECK(g.data.edge_count() == below);
}

TEST_CASE("hard RGG consistency holds for every geometry at n = 200") {
    // a_ij = 1 <=> d(z_i, z_j) < R under the generator's own metric
    for (auto src : {GeometryKind::Euclidean, GeometryKind::Spherical, GeometryKind::Hyperboloid}) {
        double R = src == GeometryKind::Spherical ? 0.795 : (src == GeometryKind::Euclidean ? 0.806 : 1.885);
        auto g = generate_hard_rgg(src, 200, R, 21);
        auto dist = [&](int i, int j) {
            if (src == GeometryKind::Euclidean) {
                double dx = g.positions[2 * i] - g.positions[2 * j];
                double dy = g.positions[2 * i + 1] - g.positions[2 * j + 1];
                return std::sqrt(dx * dx + dy * dy);
            }
            if (src == GeometryKind::Spherical) {
                const double* a = &g.positions[3 * i];
                const double* b = &g.positions[3 * j];
                double cx = a[1] * b[2] - a[2] * b[1];
                double cy = a[2] * b[0] - a[0] * b[2];
                double cz = a[0] * b[1] - a[1] * b[0];
                return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz),
                                  a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
            }
            double ux = g.positions[2 * i], uy = g.positions[2 * i + 1];
            double vx = g.positions[2 * j], vy = g.positions[2 * j + 1];
            double du2 = (ux - vx) * (ux - vx) + (uy - vy) * (uy - vy);
            return std::acosh(1.0 + 2.0 * du2 / ((1 - ux * ux - uy * uy) * (1 - vx * vx - vy * vy)));
        };
        for (int i = 0; i < 200; ++i)
            for (int j = i + 1; j < 200; ++j)
                REQUIRE(static_cast<bool>(g.data.labels[dyad_index(i, j, 200)]) == (dist(i, j) < R));
    }
}

TEST_CASE("generators are deterministic in the seed") {
    auto a = generate_hard_rgg(GeometryKind::Hyperboloid, 30, 1.8, 5);
    auto b = generate_hard_rgg(GeometryKind::Hyperboloid, 30, 1.8, 5);
    CHECK(a.data.labels == b.data.labels);
    CHECK(a.positions == b.positions);
    auto c = generate_sbm5(30, 0.6, 0.05, 5);
    auto d = generate_sbm5(30, 0.6, 0.05, 5);
    CHECK(c.data.labels == d.data.labels);
    auto e = generate_core_periphery(30, 0.2, 0.8, 0.4, 0.05, 5);
    auto f = generate_core_periphery(30, 0.2, 0.8, 0.4, 0.05, 5);
    CHECK(e.data.labels == f.data.labels);
}

TEST_CASE("sbm5 structure: cliques, sizes, density") {
    auto cliques = generate_sbm5(50, 1.0, 0.0, 9);
    std::vector<int> sizes(5, 0);
    for (int lab : cliques.labels) sizes[lab]++;
    for (int s : sizes) CHECK(s == 10);
    for (int i = 0; i < 50; ++i)
        for (int j = i + 1; j < 50; ++j)
            CHECK(static_cast<bool>(cliques.data.labels[dyad_index(i, j, 50)]) ==
                  (cliques.labels[i] == cliques.labels[j]));

    // p_in = p_out = p behaves like G(n, p): empirical density within 3 SE
    const double p = 0.3;
    std::size_t edges = 0, pairs = 0;
    for (int seed = 0; seed < 100; ++seed) {
        auto g = generate_sbm5(30, p, p, 1000 + seed);
        edges += g.data.edge_count();
        pairs += g.data.n_dyads();
    }
    double density = static_cast<double>(edges) / static_cast<double>(pairs);
    double se = std::sqrt(p * (1 - p) / static_cast<double>(pairs));
    CHECK(std::fabs(density - p) < 3 * se);
}

TEST_CASE("core-periphery structure and block densities") {
    auto star = generate_core_periphery(20, 0.2, 1.0, 1.0, 0.0, 3);
    int n_core = 0;
    for (int lab : star.labels) n_core += lab;
    CHECK(n_core == 4);
    // every periphery pair is non-adjacent yet shares every core neighbor
    for (int i = 0; i < 20; ++i)
        for (int j = i + 1; j < 20; ++j) {
            bool edge = star.data.labels[dyad_index(i, j, 20)];
            if (!star.labels[i] && !star.labels[j]) CHECK(!edge);
            else CHECK(edge);
        }

    auto ten = generate_core_periphery(50, 0.2, 0.8, 0.4, 0.05, 4);
    int cores = 0;
    for (int lab : ten.labels) cores += lab;
    CHECK(cores == 10);

    // empirical block densities within 3 SE
    std::size_t cc_e = 0, cc_p = 0, cp_e = 0, cp_p = 0, pp_e = 0, pp_p = 0;
    for (int seed = 0; seed < 100; ++seed) {
        auto g = generate_core_periphery(30, 0.2, 0.8, 0.4, 0.05, 2000 + seed);
        for (int i = 0; i < 30; ++i)
            for (int j = i + 1; j < 30; ++j) {
                bool edge = g.data.labels[dyad_index(i, j, 30)];
                if (g.labels[i] && g.labels[j]) { ++cc_p; cc_e += edge; }
                else if (g.labels[i] || g.labels[j]) { ++cp_p; cp_e += edge; }
                else { ++pp_p; pp_e += edge; }
            }
    }
    auto within3se = [](std::size_t e, std::size_t n, double p) {
        double hat = static_cast<double>(e) / n;
        return std::fabs(hat - p) < 3 * std::sqrt(p * (1 - p) / n);
    };
    CHECK(within3se(cc_e, cc_p, 0.8));
    CHECK(within3se(cp_e, cp_p, 0.4));
    CHECK(within3se(pp_e, pp_p, 0.05));
}

TEST_CASE("edge list loader: comments, duplicates, symmetrization, remapping") {
    std::string path = temp_path("rggsb_loader_test.txt");
    {
        std::ofstream out(path);
        out << "% comment\n# another comment\n\n1 2\n2 3\n";
    }
    DyadData d = load_edge_list(path);
    CHECK(d.n_nodes == 3);
    CHECK(d.edge_count() == 2);
    CHECK(d.labels[dyad_index(0, 1, 3)] == 1);
    CHECK(d.labels[dyad_index(1, 2, 3)] == 1);
    CHECK(d.labels[dyad_index(0, 2, 3)] == 0);

    {
        std::ofstream out(path);
        out << "1 2\n2 1\n1 2 3.5\n7 7\n2 9\n";
    }
    DyadData dd = load_edge_list(path);
    CHECK(dd.n_nodes == 4);  // ids 1, 2, 7, 9 -> 4 dense nodes, first-appearance order
    CHECK(dd.edge_count() == 2);  // (1,2) deduped+symmetrized, (7,7) dropped, (2,9)

    {
        std::ofstream out(path);
        out << "1 2\nnot numbers here\n";
    }
    CHECK_THROWS_AS(load_edge_list(path), IoError);
    {
        std::ofstream out(path);
        out << "1\n";
    }
    CHECK_THROWS_AS(load_edge_list(path), IoError);
    {
        std::ofstream out(path);
        out << "% only comments\n";
    }
    CHECK_THROWS_AS(load_edge_list(path), IoError);
    CHECK_THROWS_AS(load_edge_list("/nonexistent/nope.txt"), IoError);
    std::remove(path.c_str());
}

TEST_CASE("bundled karate fixture loads with the documented shape") {
    DyadData karate = load_edge_list(std::string(RGGSB_DATA_DIR) + "/karate.txt");
    CHECK(karate.n_nodes == 34);
    CHECK(karate.edge_count() == 78);
}

TEST_CASE("bundled dolphins fixture loads with the documented shape") {
    DyadData dolphins = load_edge_list(std::string(RGGSB_DATA_DIR) + "/dolphins.txt");
    CHECK(dolphins.n_nodes == 62);
    CHECK(dolphins.edge_count() == 159);
}

TEST_CASE("loader idempotence: export then reload reproduces the graph") {
    auto g = generate_sbm5(25, 0.7, 0.1, 8);
    std::string path = temp_path("rggsb_roundtrip.txt");
    write_edge_list(g.data, path, "roundtrip test");
    DyadData back = load_edge_list(path);
    CHECK(back.n_nodes == g.data.n_nodes);
    CHECK(back.labels == g.data.labels);
    // loading the re-export of the loaded graph is also identical
    write_edge_list(back, path);
    DyadData again = load_edge_list(path);
    CHECK(again.labels == back.labels);
    std::remove(path.c_str());
}

TEST_CASE("write_results: optional sections control the emitted files") {
    RiskTable t;
    t.dataset = "demo";
    t.geometries = {GeometryKind::Euclidean};
    t.eta_grid = {0.5, 1.0};
    t.cells.resize(2);
    t.cells[0] = RiskCell{GeometryKind::Euclidean, 0.5, true, "", 1.5, 0.5, {1.5}, {0.5}, {}, {}, false};
    t.cells[1] = RiskCell{GeometryKind::Euclidean, 1.0, true, "", 2.0, 0.6, {2.0}, {0.6}, {}, {}, false};
    select_models(t);

    std::string dir = temp_path("rggsb_out");
    std::filesystem::remove_all(dir);
    auto written = write_results(t, {}, {}, 0, dir);
    REQUIRE(written.size() == 2);  // summary + JSON only
    CHECK(std::filesystem::exists(dir + "/summary.csv"));
    CHECK(std::filesystem::exists(dir + "/risk_table.json"));
    CHECK(!std::filesystem::exists(dir + "/loss_curves.csv"));

    auto curves = make_curve_rows(t);
    CHECK(curves.size() == t.geometries.size() * t.eta_grid.size());
    std::vector<double> pos{0.0, 1.0, 2.0, 3.0};
    written = write_results(t, curves, pos, 2, dir);
    CHECK(written.size() == 4);
    CHECK(std::filesystem::exists(dir + "/loss_curves.csv"));
    CHECK(std::filesystem::exists(dir + "/embedding.csv"));

    // curve file row count = |geometries| x |eta_grid| (+ header)
    std::ifstream in(dir + "/loss_curves.csv");
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == static_cast<int>(curves.size()) + 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("risk table JSON file round-trips through write_results") {
    RiskTable t;
    t.dataset = "rt";
    t.geometries = {GeometryKind::Spherical};
    t.eta_grid = {0.3};
    t.cells.resize(1);
    t.cells[0] = RiskCell{GeometryKind::Spherical, 0.3, true, "", 0.9, 0.2, {0.9}, {0.2}, {}, {0.4, 0.6}, false};
    t.scored_dyads = {2, 5};
    t.scored_labels = {1, 0};
    select_models(t);
    std::string dir = temp_path("rggsb_out_json");
    std::filesystem::remove_all(dir);
    write_results(t, {}, {}, 0, dir);
    std::ifstream in(dir + "/risk_table.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RiskTable back = RiskTable::from_json(text);
    CHECK(back == t);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
