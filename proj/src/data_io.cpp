#include "rggsb/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "rggsb/errors.hpp"
#include "rggsb/util.hpp"

namespace rggsb {

namespace {

constexpr double kPoincareDiskRadius = 3.0;  // hyperbolic radius of the sampling disk
// Per-kind default thresholds targeting edge density ~0.15 (n = 50)
constexpr double kDefaultEuclideanR = 0.806;
constexpr double kDefaultSphericalR = 0.795;
constexpr double kDefaultPoincareR = 1.885;

double poincare_disk_distance(double ux, double uy, double vx, double vy) {
    double du2 = (ux - vx) * (ux - vx) + (uy - vy) * (uy - vy);
    double au = 1.0 - (ux * ux + uy * uy);
    double av = 1.0 - (vx * vx + vy * vy);
    return std::acosh(1.0 + 2.0 * du2 / (au * av));
}

}  // namespace

const char* generator_name(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::SBM5: return "sbm5";
        case GeneratorKind::PoincareRGG: return "poincare";
        case GeneratorKind::SphericalRGG: return "spherical";
        case GeneratorKind::CorePeriphery: return "core_periphery";
        case GeneratorKind::EuclideanRGG: return "euclidean";
    }
    return "?";
}

std::optional<GeneratorKind> parse_generator(std::string_view name) {
    if (name == "sbm5") return GeneratorKind::SBM5;
    if (name == "poincare") return GeneratorKind::PoincareRGG;
    if (name == "spherical") return GeneratorKind::SphericalRGG;
    if (name == "core_periphery") return GeneratorKind::CorePeriphery;
    if (name == "euclidean") return GeneratorKind::EuclideanRGG;
    return std::nullopt;
}

void GeneratorSpec::validate() const {
    if (n_nodes < 3) throw UsageError("generator needs at least 3 nodes");
    if (R < 0.0) throw UsageError("threshold radius must be nonnegative");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_in) || !prob(p_out) || !prob(p_cc) || !prob(p_cp) || !prob(p_pp))
        throw UsageError("probabilities must lie in [0, 1]");
    if (!(core_frac > 0.0 && core_frac < 1.0)) throw UsageError("core fraction must lie in (0, 1)");
}

GeneratedGraph generate_hard_rgg(GeometryKind source, int n, double R, std::uint64_t seed) {
    if (n < 3) throw UsageError("need at least 3 nodes");
    if (!(R > 0.0)) throw UsageError("threshold radius must be positive");

    std::mt19937_64 rng(splitmix64(seed ^ 0x68726767ULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    GeneratedGraph g;
    g.data.n_nodes = n;
    g.data.labels.assign(dyad_count(n), 0);

    switch (source) {
        case GeometryKind::Euclidean: {
            g.pos_dim = 2;
            g.positions.resize(static_cast<std::size_t>(n) * 2);
            for (auto& v : g.positions) v = normal(rng);
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    double dx = g.positions[2 * i] - g.positions[2 * j];
                    double dy = g.positions[2 * i + 1] - g.positions[2 * j + 1];
                    if (std::sqrt(dx * dx + dy * dy) < R)
                        g.data.labels[dyad_index(i, j, n)] = 1;
                }
            break;
        }
        case GeometryKind::Spherical: {
            g.pos_dim = 3;
            g.positions.resize(static_cast<std::size_t>(n) * 3);
            for (int i = 0; i < n; ++i) {
                double x = normal(rng), y = normal(rng), z = normal(rng);
                double norm = std::sqrt(x * x + y * y + z * z);
                g.positions[3 * i] = x / norm;
                g.positions[3 * i + 1] = y / norm;
                g.positions[3 * i + 2] = z / norm;
            }
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    const double* a = &g.positions[3 * i];
                    const double* b = &g.positions[3 * j];
                    double d = manifold_detail::dist_raw(a, b, GeometryKind::Spherical);
                    if (d < R) g.data.labels[dyad_index(i, j, n)] = 1;
                }
            break;
        }
        case GeometryKind::Hyperboloid: {
            // uniform-area sampling on a hyperbolic disk, stored as Poincare-disk coords
            g.pos_dim = 2;
            g.positions.resize(static_cast<std::size_t>(n) * 2);
            const double cosh_max = std::cosh(kPoincareDiskRadius);
            for (int i = 0; i < n; ++i) {
                double rh = std::acosh(1.0 + unif(rng) * (cosh_max - 1.0));
                double theta = 2.0 * std::numbers::pi * unif(rng);
                double rd = std::tanh(0.5 * rh);
                g.positions[2 * i] = rd * std::cos(theta);
                g.positions[2 * i + 1] = rd * std::sin(theta);
            }
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    double d = poincare_disk_distance(g.positions[2 * i], g.positions[2 * i + 1],
                                                      g.positions[2 * j], g.positions[2 * j + 1]);
                    if (d < R) g.data.labels[dyad_index(i, j, n)] = 1;
                }
            break;
        }
    }
    return g;
}

GeneratedGraph generate_sbm5(int n, double p_in, double p_out, std::uint64_t seed) {
    if (n < 10) throw UsageError("sbm5 needs at least 10 nodes");
    if (!(p_out >= 0.0 && p_in <= 1.0 && p_out <= p_in))
        throw UsageError("need 0 <= p_out <= p_in <= 1");

    std::mt19937_64 rng(splitmix64(seed ^ 0x73626d35ULL));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    GeneratedGraph g;
    g.data.n_nodes = n;
    g.data.labels.assign(dyad_count(n), 0);
    g.labels.resize(n);
    // near-equal communities: the first n%5 communities get one extra node
    int base = n / 5, extra = n % 5;
    int node = 0;
    for (int c = 0; c < 5; ++c) {
        int size = base + (c < extra ? 1 : 0);
        for (int k = 0; k < size; ++k) g.labels[node++] = c;
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double p = g.labels[i] == g.labels[j] ? p_in : p_out;
            if (unif(rng) < p) g.data.labels[dyad_index(i, j, n)] = 1;
        }
    return g;
}

GeneratedGraph generate_core_periphery(int n, double core_frac, double p_cc, double p_cp,
                                       double p_pp, std::uint64_t seed) {
    if (n < 3) throw UsageError("need at least 3 nodes");
    if (!(core_frac > 0.0 && core_frac < 1.0)) throw UsageError("core fraction must lie in (0, 1)");

    std::mt19937_64 rng(splitmix64(seed ^ 0x636f7265ULL));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    GeneratedGraph g;
    g.data.n_nodes = n;
    g.data.labels.assign(dyad_count(n), 0);
    int n_core = static_cast<int>(std::llround(core_frac * n));
    g.labels.resize(n);
    for (int i = 0; i < n; ++i) g.labels[i] = i < n_core ? 1 : 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double p = g.labels[i] && g.labels[j] ? p_cc : (g.labels[i] || g.labels[j] ? p_cp : p_pp);
            if (unif(rng) < p) g.data.labels[dyad_index(i, j, n)] = 1;
        }
    return g;
}

GeneratedGraph generate(const GeneratorSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case GeneratorKind::SBM5:
            return generate_sbm5(spec.n_nodes, spec.p_in, spec.p_out, spec.seed);
        case GeneratorKind::PoincareRGG:
            return generate_hard_rgg(GeometryKind::Hyperboloid, spec.n_nodes,
                                     spec.R > 0 ? spec.R : kDefaultPoincareR, spec.seed);
        case GeneratorKind::SphericalRGG:
            return generate_hard_rgg(GeometryKind::Spherical, spec.n_nodes,
                                     spec.R > 0 ? spec.R : kDefaultSphericalR, spec.seed);
        case GeneratorKind::EuclideanRGG:
            return generate_hard_rgg(GeometryKind::Euclidean, spec.n_nodes,
                                     spec.R > 0 ? spec.R : kDefaultEuclideanR, spec.seed);
        case GeneratorKind::CorePeriphery:
            return generate_core_periphery(spec.n_nodes, spec.core_frac, spec.p_cc, spec.p_cp,
                                           spec.p_pp, spec.seed);
    }
    throw UsageError("unknown generator kind");
}

DyadData load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open edge list: " + path);

    std::map<long, int> remap;  // original id -> dense 0-based id, first appearance order
    std::vector<std::pair<int, int>> edges;
    std::string line;
    long line_no = 0;
    auto dense_id = [&](long raw) {
        auto it = remap.find(raw);
        if (it != remap.end()) return it->second;
        int id = static_cast<int>(remap.size());
        remap.emplace(raw, id);
        return id;
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) continue;
        if (line[first] == '%' || line[first] == '#') continue;
        std::istringstream ss(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ss >> tok) tokens.push_back(tok);
        auto fail = [&]() -> IoError {
            return IoError("malformed edge list line " + std::to_string(line_no) + " in " + path);
        };
        if (tokens.size() < 2 || tokens.size() > 3) throw fail();
        long a, b;
        std::size_t used = 0;
        try {
            a = std::stol(tokens[0], &used);
            if (used != tokens[0].size()) throw fail();
            b = std::stol(tokens[1], &used);
            if (used != tokens[1].size()) throw fail();
            if (tokens.size() == 3) {
                std::stod(tokens[2], &used);  // weight, parsed for validity then ignored
                if (used != tokens[2].size()) throw fail();
            }
        } catch (const std::logic_error&) {
            throw fail();
        }
        int u = dense_id(a);
        int v = dense_id(b);
        if (u == v) continue;  // self-loop
        edges.emplace_back(std::min(u, v), std::max(u, v));
    }
    if (remap.empty() || edges.empty()) throw IoError("empty graph in " + path);

    DyadData data;
    data.n_nodes = static_cast<int>(remap.size());
    data.labels.assign(dyad_count(data.n_nodes), 0);
    for (auto [u, v] : edges) data.labels[dyad_index(u, v, data.n_nodes)] = 1;  // dedupes
    return data;
}

void write_edge_list(const DyadData& data, const std::string& path, const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write edge list: " + path);
    if (!comment.empty()) out << "% " << comment << "\n";
    for (int i = 0; i < data.n_nodes; ++i)
        for (int j = i + 1; j < data.n_nodes; ++j)
            if (data.labels[dyad_index(i, j, data.n_nodes)]) out << i + 1 << " " << j + 1 << "\n";
    if (!out) throw IoError("write failed: " + path);
}

std::vector<CurveRow> make_curve_rows(const RiskTable& table) {
    std::vector<CurveRow> rows;
    rows.reserve(table.cells.size());
    for (const auto& c : table.cells) {
        CurveRow r;
        r.geometry = c.geometry;
        r.eta = c.eta;
        r.cum_log_loss = c.cum_log_loss;
        r.cum_sq_loss = c.cum_sq_loss;
        r.ok = c.ok;
        r.rhat = 0.0;
        r.ess = std::numeric_limits<double>::infinity();
        for (const auto& d : c.diagnostics) {
            r.rhat = std::max(r.rhat, d.worst_rhat());
            r.ess = std::min(r.ess, d.min_ess());
        }
        if (c.diagnostics.empty()) r.ess = 0.0;
        rows.push_back(r);
    }
    return rows;
}

namespace {

std::string csv_number(double v) {
    std::ostringstream ss;
    ss.imbue(std::locale::classic());
    ss.precision(12);
    ss << v;
    return ss.str();
}

}  // namespace

std::vector<std::string> write_results(const RiskTable& table, const std::vector<CurveRow>& curves,
                                       const std::vector<double>& positions, int pos_dim,
                                       const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    std::vector<std::string> written;

    // Table-1-shaped summary: one row per geometry at its selected eta
    {
        std::string path = (fs::path(out_dir) / "summary.csv").string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << "Dataset,Geometry,eta,LogLoss,SqLoss,ESS,Rhat\n";
        for (std::size_t gi = 0; gi < table.geometries.size(); ++gi) {
            if (std::isnan(table.eta_star[gi])) continue;
            const RiskCell* c = table.find_cell(table.geometries[gi], table.eta_star[gi]);
            if (!c) continue;
            double rhat = 0.0, ess = std::numeric_limits<double>::infinity();
            for (const auto& d : c->diagnostics) {
                rhat = std::max(rhat, d.worst_rhat());
                ess = std::min(ess, d.min_ess());
            }
            if (c->diagnostics.empty()) ess = 0.0;
            out << table.dataset << "," << geometry_name(c->geometry) << "," << csv_number(c->eta)
                << "," << csv_number(c->cum_log_loss) << "," << csv_number(c->cum_sq_loss) << ","
                << csv_number(ess) << "," << csv_number(rhat) << "\n";
        }
        if (!out) throw IoError("write failed: " + path);
        written.push_back(path);
    }

    {
        std::string path = (fs::path(out_dir) / "risk_table.json").string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path);
        out << table.to_json() << "\n";
        if (!out) throw IoError("write failed: " + path);
        written.push_back(path);
    }

    if (!curves.empty()) {
        std::string path = (fs::path(out_dir) / "loss_curves.csv").string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << "Geometry,eta,CumLogLoss,CumSqLoss,ESS,Rhat,ok\n";
        for (const auto& r : curves)
            out << geometry_name(r.geometry) << "," << csv_number(r.eta) << ","
                << csv_number(r.cum_log_loss) << "," << csv_number(r.cum_sq_loss) << ","
                << csv_number(r.ess) << "," << csv_number(r.rhat) << "," << (r.ok ? 1 : 0) << "\n";
        if (!out) throw IoError("write failed: " + path);
        written.push_back(path);
    }

    if (!positions.empty()) {
        if (pos_dim <= 0 || positions.size() % pos_dim != 0)
            throw UsageError("positions size is not a multiple of pos_dim");
        std::string path = (fs::path(out_dir) / "embedding.csv").string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << "node";
        for (int d = 0; d < pos_dim; ++d) out << ",x" << d;
        out << "\n";
        std::size_t n = positions.size() / pos_dim;
        for (std::size_t i = 0; i < n; ++i) {
            out << i + 1;
            for (int d = 0; d < pos_dim; ++d) out << "," << csv_number(positions[i * pos_dim + d]);
            out << "\n";
        }
        if (!out) throw IoError("write failed: " + path);
        written.push_back(path);
    }

    return written;
}

}  // namespace rggsb
