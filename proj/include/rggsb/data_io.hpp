#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rggsb/model.hpp"
#include "rggsb/prequential.hpp"

namespace rggsb {

enum class GeneratorKind { SBM5, PoincareRGG, SphericalRGG, CorePeriphery, EuclideanRGG };

const char* generator_name(GeneratorKind k);
std::optional<GeneratorKind> parse_generator(std::string_view name);

// Kind-specific parameters; unused fields are ignored. Defaults target edge
// density around 0.15 at n = 50.
struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::SBM5;
    int n_nodes = 50;
    std::uint64_t seed = 0;
    double R = 0.0;          // hard threshold radius; 0 = per-kind default
    double p_in = 0.6;       // SBM within-community probability
    double p_out = 0.05;     // SBM across-community probability
    double core_frac = 0.2;  // core-periphery
    double p_cc = 0.8;
    double p_cp = 0.4;
    double p_pp = 0.05;

    void validate() const;
};

struct GeneratedGraph {
    DyadData data;
    // Ground-truth latent positions for the geometric generators (row-major,
    // pos_dim columns); alignment checks only, never used in inference.
    std::vector<double> positions;
    int pos_dim = 0;
    std::vector<int> labels;  // community / core membership where applicable
};

// Positions sampled on the source geometry, hard-threshold edges d < R.
// Euclidean: iid Normal(0,1) in R^2. Spherical: uniform on S^2 (great-circle
// metric). Poincare: uniform area on a hyperbolic disk of radius 3, stored as
// Poincare-disk coordinates with the disk metric.
GeneratedGraph generate_hard_rgg(GeometryKind source, int n, double R, std::uint64_t seed);

// Five near-equal communities, Bernoulli(p_in) within and Bernoulli(p_out) across.
GeneratedGraph generate_sbm5(int n, double p_in, double p_out, std::uint64_t seed);

GeneratedGraph generate_core_periphery(int n, double core_frac, double p_cc, double p_cp,
                                       double p_pp, std::uint64_t seed);

GeneratedGraph generate(const GeneratorSpec& spec);

// Whitespace-separated "source target [weight]" lines; '%' or '#' comments;
// ids remapped to dense 1..N by first appearance; weights ignored; duplicates,
// reverse duplicates and self-loops dropped.
DyadData load_edge_list(const std::string& path);

// 1-indexed edge list compatible with load_edge_list.
void write_edge_list(const DyadData& data, const std::string& path,
                     const std::string& comment = "");

// Per-(geometry, eta) row of the loss-curve file.
struct CurveRow {
    GeometryKind geometry;
    double eta;
    double cum_log_loss;
    double cum_sq_loss;
    double rhat;  // worst over blocks and scalar summaries
    double ess;   // smallest over blocks and scalar summaries
    bool ok;
};

std::vector<CurveRow> make_curve_rows(const RiskTable& table);

// Emits summary.csv and risk_table.json always; loss_curves.csv when curve
// rows are supplied; embedding.csv when positions are supplied (row-major,
// pos_dim columns). Returns the paths written.
std::vector<std::string> write_results(const RiskTable& table,
                                       const std::vector<CurveRow>& curves,
                                       const std::vector<double>& positions, int pos_dim,
                                       const std::string& out_dir);

}  // namespace rggsb
