#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "rggsb/data_io.hpp"
#include "rggsb/errors.hpp"
#include "rggsb/prequential.hpp"
#include "rggsb/util.hpp"

using namespace rggsb;

namespace {

SweepConfig tiny_sweep_config() {
    SweepConfig cfg;
    cfg.geometries = {GeometryKind::Euclidean};
    cfg.eta_grid = {0.5, 1.0};
    cfg.K = 2;
    cfg.rho = 0.3;
    cfg.seed = 91;
    cfg.chain_cfg.n_chains = 2;
    cfg.chain_cfg.n_warmup = 60;
    cfg.chain_cfg.n_samples = 80;
    return cfg;
}

DyadData small_hard_rgg() {
    return generate_hard_rgg(GeometryKind::Euclidean, 6, 1.0, 5).data;
}

}  // namespace

TEST_SUITE("prequential") {

TEST_CASE("partition sizes follow the rounding rule") {
    auto p = partition_dyads(5, 0.2, 4, 1);  // 10 dyads
    CHECK(p.initial_block.size() == 2);
    REQUIRE(p.test_blocks.size() == 4);
    for (const auto& b : p.test_blocks) CHECK(b.size() == 2);

    auto q = partition_dyads(34, 0.2, 5, 1);  // 561 dyads
    CHECK(q.initial_block.size() == 112);
    std::size_t total = 0;
    for (const auto& b : q.test_blocks) {
        CHECK((b.size() == 89 || b.size() == 90));
        total += b.size();
    }
    CHECK(total == 449);
}

TEST_CASE("partition is deterministic and covers every dyad exactly once") {
    auto a = partition_dyads(12, 0.25, 3, 77);
    auto b = partition_dyads(12, 0.25, 3, 77);
    CHECK(a.content_hash() == b.content_hash());
    CHECK(a.initial_block == b.initial_block);

    for (int n : {5, 13, 34, 50}) {
        auto p = partition_dyads(n, 0.2, 5, n);
        std::set<std::uint32_t> seen(p.initial_block.begin(), p.initial_block.end());
        std::size_t count = p.initial_block.size();
        for (const auto& blk : p.test_blocks) {
            seen.insert(blk.begin(), blk.end());
            count += blk.size();
        }
        CHECK(count == dyad_count(n));        // pairwise disjoint
        CHECK(seen.size() == dyad_count(n));  // union is everything
        CHECK(*std::max_element(seen.begin(), seen.end()) == dyad_count(n) - 1);
    }
}

TEST_CASE("partition rejects configurations with empty blocks") {
    CHECK_THROWS_AS(partition_dyads(3, 0.2, 5, 1), UsageError);   // 3 dyads, 5 blocks
    CHECK_THROWS_AS(partition_dyads(5, 0.999, 2, 1), UsageError); // nothing left to test
}

TEST_CASE("posterior_predictive equals the single-draw link probability") {
    DyadData data = small_hard_rgg();
    Hyperparams h;
    LatentState s = sample_prior_state(6, GeometryKind::Euclidean, h, 3);
    SampleBatch batch;
    batch.n_chains = 1;
    batch.n_samples = 1;
    batch.dim = s.z.size() + 1;
    batch.draws = pack_state(s);
    batch.log_density = {0.0};
    std::vector<std::uint32_t> dyads{0, 3, 7};
    auto p = posterior_predictive(batch, dyads, 6, GeometryKind::Euclidean, h.alpha);
    REQUIRE(p.size() == 3);
    double r = std::exp(s.rho);
    for (std::size_t k = 0; k < dyads.size(); ++k) {
        auto [i, j] = dyad_endpoints(dyads[k], 6);
        ChartPoint a{{s.row(i)[0], s.row(i)[1], 0}}, b{{s.row(j)[0], s.row(j)[1], 0}};
        double d = geodesic_distance(embed_chart(a, GeometryKind::Euclidean),
                                     embed_chart(b, GeometryKind::Euclidean),
                                     GeometryKind::Euclidean);
        CHECK(p[k] == doctest::Approx(link_prob(d, r, h.alpha)).epsilon(1e-15));
    }
}

TEST_CASE("posterior_predictive averages draws and matches brute force") {
    DyadData data = small_hard_rgg();
    Hyperparams h;
    ChainConfig cfg;
    cfg.n_chains = 4;
    cfg.n_warmup = 100;
    cfg.n_samples = 1000;
    cfg.seed = 12;
    h.eta = 0.4;
    SampleBatch batch = fit_eta_posterior(data, DyadMask::all(data.n_dyads()),
                                          GeometryKind::Euclidean, h, cfg);
    std::vector<std::uint32_t> dyads;
    for (std::uint32_t k = 0; k < data.n_dyads(); ++k) dyads.push_back(k);
    auto p = posterior_predictive(batch, dyads, 6, GeometryKind::Euclidean, h.alpha);

    // brute-force recomputation, draw by draw
    std::vector<double> brute(dyads.size(), 0.0);
    for (std::size_t c = 0; c < batch.n_chains; ++c)
        for (std::size_t s = 0; s < batch.n_samples; ++s) {
            LatentState st = unpack_state(batch.draw(c, s), 6, GeometryKind::Euclidean);
            double r = st.radius();
            for (std::size_t k = 0; k < dyads.size(); ++k) {
                auto [i, j] = dyad_endpoints(dyads[k], 6);
                ChartPoint a{{st.row(i)[0], st.row(i)[1], 0}}, b{{st.row(j)[0], st.row(j)[1], 0}};
                double d = geodesic_distance(embed_chart(a, GeometryKind::Euclidean),
                                             embed_chart(b, GeometryKind::Euclidean),
                                             GeometryKind::Euclidean);
                brute[k] += link_prob(d, r, h.alpha);
            }
        }
    for (auto& v : brute) v /= static_cast<double>(batch.total_draws());
    for (std::size_t k = 0; k < p.size(); ++k)
        CHECK(p[k] == doctest::Approx(brute[k]).epsilon(1e-12));

    SampleBatch empty;
    CHECK_THROWS_AS(posterior_predictive(empty, dyads, 6, GeometryKind::Euclidean, h.alpha),
                    UsageError);
}

TEST_CASE("two draws yielding 0.2 and 0.8 average to 0.5") {
    // alpha=1, r=1: distances chosen so sigma(r-d) = 0.2 and 0.8
    double d1 = 1.0 + std::log(4.0);  // sigma(1 - d1) = 0.2
    double d2 = 1.0 - std::log(4.0);  // sigma(1 - d2) = 0.8
    SampleBatch batch;
    batch.n_chains = 1;
    batch.n_samples = 2;
    batch.dim = 5;  // 2 nodes x 2 + rho
    batch.draws = {0.0, 0.0, d1, 0.0, 0.0,   // draw 1: nodes at distance d1, rho=0
                   0.0, 0.0, d2, 0.0, 0.0};  // draw 2: distance d2
    batch.log_density = {0.0, 0.0};
    auto p = posterior_predictive(batch, {0}, 2, GeometryKind::Euclidean, 1.0);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("block_losses fixtures") {
    auto [ll, sq] = block_losses({0.5, 0.5}, {0, 1});
    CHECK(ll == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    CHECK(sq == doctest::Approx(0.25).epsilon(1e-12));

    auto [ll2, sq2] = block_losses({0.99}, {1});
    CHECK(ll2 == doctest::Approx(0.010050335853501441).epsilon(1e-12));
    CHECK(sq2 == doctest::Approx(0.0001).epsilon(1e-10));

    auto [ll3, sq3] = block_losses({0.9}, {0});
    CHECK(ll3 == doctest::Approx(2.302585092994046).epsilon(1e-12));
    CHECK(sq3 == doctest::Approx(0.81).epsilon(1e-12));

    CHECK_THROWS_AS(block_losses({1.0}, {1}), NumericError);
    CHECK_THROWS_AS(block_losses({}, {}), UsageError);
}

TEST_CASE("degenerate sweep: one geometry, one eta, one block") {
    DyadData data = small_hard_rgg();
    SweepConfig cfg = tiny_sweep_config();
    cfg.eta_grid = {0.5};
    cfg.K = 1;
    RiskTable t = run_sweep(data, cfg, "tiny");
    REQUIRE(t.cells.size() == 1);
    REQUIRE(t.cells[0].ok);
    CHECK(t.cells[0].per_block_log_loss.size() == 1);
    CHECK(t.cells[0].cum_log_loss == t.cells[0].per_block_log_loss[0]);
    CHECK(t.eta_star[0] == 0.5);
    CHECK(t.best_geometry == GeometryKind::Euclidean);
}

TEST_CASE("run_sweep matches an independent step-by-step re-execution") {
    DyadData data = small_hard_rgg();
    SweepConfig cfg = tiny_sweep_config();
    RiskTable t = run_sweep(data, cfg, "oracle");

    DyadPartition part = partition_dyads(data.n_nodes, cfg.rho, cfg.K, cfg.seed);
    for (std::size_t ei = 0; ei < cfg.eta_grid.size(); ++ei) {
        Hyperparams h = cfg.hyper;
        h.eta = cfg.eta_grid[ei];
        DyadMask train = DyadMask::none(data.n_dyads());
        for (auto d : part.initial_block) train.included[d] = 1;
        double cum_ll = 0.0, cum_sq = 0.0;
        for (std::size_t k = 0; k < part.test_blocks.size(); ++k) {
            ChainConfig ccfg = cfg.chain_cfg;
            ccfg.seed = seed_mix(cfg.seed,
                                 {static_cast<std::uint64_t>(GeometryKind::Euclidean), ei, k});
            SampleBatch batch =
                fit_eta_posterior(data, train, GeometryKind::Euclidean, h, ccfg, 1);
            auto p = posterior_predictive(batch, part.test_blocks[k], data.n_nodes,
                                          GeometryKind::Euclidean, h.alpha);
            std::vector<std::uint8_t> labels;
            for (auto d : part.test_blocks[k]) labels.push_back(data.labels[d]);
            auto [ll, sq] = block_losses(p, labels);
            cum_ll += ll;
            cum_sq += sq;
            for (auto d : part.test_blocks[k]) train.included[d] = 1;
        }
        const RiskCell& cell = t.cell(0, ei);
        CHECK(cell.cum_log_loss == doctest::Approx(cum_ll).epsilon(1e-9));
        CHECK(cell.cum_sq_loss == doctest::Approx(cum_sq).epsilon(1e-9));
    }
}

TEST_CASE("RiskTable invariants: cumulative sums, argmin rules, shared partition") {
    DyadData data = small_hard_rgg();
    SweepConfig cfg = tiny_sweep_config();
    cfg.geometries = {GeometryKind::Euclidean, GeometryKind::Spherical};
    RiskTable t = run_sweep(data, cfg, "inv");
    for (const auto& c : t.cells) {
        REQUIRE(c.ok);
        double sum_ll = 0.0, sum_sq = 0.0;
        for (double v : c.per_block_log_loss) sum_ll += v;
        for (double v : c.per_block_sq_loss) sum_sq += v;
        CHECK(std::fabs(c.cum_log_loss - sum_ll) <= 1e-10);
        CHECK(std::fabs(c.cum_sq_loss - sum_sq) <= 1e-10);
        CHECK(c.diagnostics.size() == static_cast<std::size_t>(cfg.K));
    }
    for (std::size_t gi = 0; gi < t.geometries.size(); ++gi) {
        double best = std::numeric_limits<double>::infinity();
        double star = 0.0;
        for (std::size_t ei = 0; ei < t.eta_grid.size(); ++ei)
            if (t.cell(gi, ei).cum_log_loss < best) {
                best = t.cell(gi, ei).cum_log_loss;
                star = t.eta_grid[ei];
            }
        CHECK(t.eta_star[gi] == star);
    }
    CHECK(t.partition_hash ==
          partition_dyads(data.n_nodes, cfg.rho, cfg.K, cfg.seed).content_hash());
}

TEST_CASE("no leakage: the training mask never contains future block dyads") {
    DyadData data = small_hard_rgg();
    auto part = partition_dyads(data.n_nodes, 0.3, 3, 4);
    DyadMask train = DyadMask::none(data.n_dyads());
    for (auto d : part.initial_block) train.included[d] = 1;
    for (std::size_t k = 0; k < part.test_blocks.size(); ++k) {
        for (std::size_t future = k; future < part.test_blocks.size(); ++future)
            for (auto d : part.test_blocks[future]) REQUIRE(train.included[d] == 0);
        for (auto d : part.test_blocks[k]) train.included[d] = 1;
    }
    // after the last block everything is training data
    CHECK(train.count() + part.initial_block.size() ==
          data.n_dyads() + part.initial_block.size());
}

TEST_CASE("select_models: single cell, tie-breaking, and Table-1-shaped ranking") {
    RiskTable t;
    t.geometries = {GeometryKind::Euclidean};
    t.eta_grid = {0.5, 1.0};
    t.cells.resize(2);
    t.cells[0] = RiskCell{GeometryKind::Euclidean, 0.5, true, "", 1.0, 0.2, {1.0}, {0.2}, {}, {}, false};
    t.cells[1] = RiskCell{GeometryKind::Euclidean, 1.0, true, "", 1.0, 0.2, {1.0}, {0.2}, {}, {}, false};
    select_models(t);
    CHECK(t.eta_star[0] == 0.5);  // tie resolves toward the smaller eta

    RiskTable t2;
    t2.geometries = {GeometryKind::Euclidean, GeometryKind::Hyperboloid, GeometryKind::Spherical};
    t2.eta_grid = {0.5};
    t2.cells.resize(3);
    t2.cells[0] = RiskCell{GeometryKind::Euclidean, 0.5, true, "", 0.877, 0.242, {0.877}, {0.242}, {}, {}, false};
    t2.cells[1] = RiskCell{GeometryKind::Hyperboloid, 0.5, true, "", 0.562, 0.166, {0.562}, {0.166}, {}, {}, false};
    t2.cells[2] = RiskCell{GeometryKind::Spherical, 0.5, true, "", 0.951, 0.250, {0.951}, {0.250}, {}, {}, false};
    select_models(t2);
    CHECK(t2.best_geometry == GeometryKind::Hyperboloid);

    RiskTable t3;
    t3.geometries = {GeometryKind::Euclidean};
    t3.eta_grid = {0.5};
    t3.cells.resize(1);
    t3.cells[0].ok = false;
    CHECK_THROWS_AS(select_models(t3), NumericError);
}

TEST_CASE("RiskTable JSON round-trip reconstructs an equal table") {
    DyadData data = small_hard_rgg();
    SweepConfig cfg = tiny_sweep_config();
    RiskTable t = run_sweep(data, cfg, "roundtrip");
    RiskTable back = RiskTable::from_json(t.to_json());
    CHECK(back == t);
    CHECK(back.to_json() == t.to_json());
}

}  // TEST_SUITE
