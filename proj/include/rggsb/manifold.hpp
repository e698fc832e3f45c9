#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace rggsb {

// The three candidate 2-D Riemannian geometries. Latent positions live in an
// unconstrained chart (so gradient-based samplers need no constraints):
//   Euclidean:   identity chart on R^2
//   Spherical:   ambient R^3 chart, embedded by normalization onto S^2
//   Hyperboloid: R^2 chart x -> (sqrt(1+|x|^2), x) onto the upper Lorentz sheet
enum class GeometryKind { Euclidean, Spherical, Hyperboloid };

constexpr int chart_dim(GeometryKind g) {
    return g == GeometryKind::Spherical ? 3 : 2;
}
constexpr int embed_dim(GeometryKind g) {
    return g == GeometryKind::Euclidean ? 2 : 3;
}
const char* geometry_name(GeometryKind g);
std::optional<GeometryKind> parse_geometry(std::string_view name);

// Unconstrained chart coordinates; only the first chart_dim(g) entries are used.
struct ChartPoint {
    std::array<double, 3> v{0.0, 0.0, 0.0};
};

// Point on the embedded manifold; only the first embed_dim(g) entries are used.
// Invariants: sphere |z| = 1 (tol 1e-12); hyperboloid <z,z>_L = -1 (tol 1e-9), z0 >= 1.
struct EmbeddedPoint {
    std::array<double, 3> v{0.0, 0.0, 0.0};
};

struct DistanceGradient {
    std::array<double, 3> wrt_a{0.0, 0.0, 0.0};
    std::array<double, 3> wrt_b{0.0, 0.0, 0.0};
};

// Chart -> manifold. Throws DomainError on non-finite input or a zero spherical chart.
EmbeddedPoint embed_chart(const ChartPoint& p, GeometryKind g);

// Geodesic distance between embedded points; validates the embedding invariants.
// Spherical uses atan2(|a x b|, a.b) for accuracy near 0 and pi; hyperboloid uses
// the shielded acosh of the (negated) Lorentz product.
double geodesic_distance(const EmbeddedPoint& a, const EmbeddedPoint& b, GeometryKind g);

// acosh with a two-term Taylor shield near 1: for s in [1-1e-9, 1+1e-7) returns
// sqrt(2e)(1 - e/12) with e = max(s-1, 0). Throws DomainError for s < 1-1e-9.
double stable_acosh(double s);

// Analytic gradient of geodesic_distance(embed(a), embed(b)) with respect to the
// chart coordinates of both endpoints. Finite everywhere, including coincident
// points (the near-singular direction degenerates to a zero gradient).
DistanceGradient distance_gradient_chart(const ChartPoint& a, const ChartPoint& b, GeometryKind g);

namespace manifold_detail {

// Unchecked kernels for hot loops. `chart` has chart_dim(g) entries, `emb` room
// for embed_dim(g). Invalid values propagate as NaN instead of throwing.
void embed_raw(const double* chart, GeometryKind g, double* emb);
double dist_raw(const double* ea, const double* eb, GeometryKind g);
// Returns the distance and fills ga/gb (chart_dim(g) entries each) with the
// chart gradients; requires both the chart and embedded coordinates.
double dist_grad_raw(const double* ca, const double* ea, const double* cb, const double* eb,
                     GeometryKind g, double* ga, double* gb);
// Non-throwing acosh shield: NaN for s < 1-1e-9.
double stable_acosh_raw(double s);
// Derivative d/ds of the shielded acosh, floored so it stays finite at s = 1.
double stable_dacosh(double s);

}  // namespace manifold_detail

}  // namespace rggsb
