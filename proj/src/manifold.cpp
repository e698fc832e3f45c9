#include "rggsb/manifold.hpp"

#include <cmath>
#include <limits>

#include "rggsb/errors.hpp"

namespace rggsb {

namespace {

constexpr double kAcoshShield = 1e-7;    // switch to the Taylor expansion below 1 + this
constexpr double kAcoshFloor = 1e-9;     // tolerated undershoot below 1 from rounding
constexpr double kGradEpsFloor = 1e-12;  // caps the acosh derivative at coincidence
constexpr double kCoincident = 1e-12;    // zero-gradient cutoff for norm/sine singularities

bool finite3(const std::array<double, 3>& v, int d) {
    for (int i = 0; i < d; ++i)
        if (!std::isfinite(v[i])) return false;
    return true;
}

double dot3(const double* a, const double* b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double norm3(const double* a) { return std::sqrt(dot3(a, a)); }

// Negated Lorentz product via the difference form 1 + <z-w, z-w>_L / 2, which
// avoids the catastrophic cancellation of z0*w0 - z1*w1 - z2*w2 near s = 1 and
// is exactly 1 for identical points.
double lorentz_s(const double* z, const double* w) {
    double d0 = z[0] - w[0], d1 = z[1] - w[1], d2 = z[2] - w[2];
    return 1.0 + 0.5 * (d1 * d1 + d2 * d2 - d0 * d0);
}

void validate_embedded(const EmbeddedPoint& p, GeometryKind g) {
    if (!finite3(p.v, embed_dim(g))) throw DomainError("embedded point has non-finite coordinates");
    const double* z = p.v.data();
    switch (g) {
        case GeometryKind::Euclidean:
            return;
        case GeometryKind::Spherical: {
            double n = norm3(z);
            if (std::fabs(n - 1.0) > 1e-12)
                throw DomainError("spherical point norm differs from 1 beyond 1e-12");
            return;
        }
        case GeometryKind::Hyperboloid: {
            double q = -z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
            if (std::fabs(q + 1.0) > 1e-9)
                throw DomainError("hyperboloid Lorentz norm differs from -1 beyond 1e-9");
            if (z[0] < 1.0) throw DomainError("hyperboloid point below the upper sheet");
            return;
        }
    }
}

}  // namespace

const char* geometry_name(GeometryKind g) {
    switch (g) {
        case GeometryKind::Euclidean: return "euclidean";
        case GeometryKind::Spherical: return "spherical";
        case GeometryKind::Hyperboloid: return "hyperboloid";
    }
    return "?";
}

std::optional<GeometryKind> parse_geometry(std::string_view name) {
    if (name == "euclidean") return GeometryKind::Euclidean;
    if (name == "spherical") return GeometryKind::Spherical;
    if (name == "hyperboloid") return GeometryKind::Hyperboloid;
    return std::nullopt;
}

namespace manifold_detail {

double stable_acosh_raw(double s) {
    if (s < 1.0 - kAcoshFloor) return std::numeric_limits<double>::quiet_NaN();
    if (s >= 1.0 + kAcoshShield) return std::acosh(s);
    double e = s > 1.0 ? s - 1.0 : 0.0;
    return std::sqrt(2.0 * e) * (1.0 - e / 12.0);
}

double stable_dacosh(double s) {
    if (s >= 1.0 + kAcoshShield) return 1.0 / std::sqrt((s - 1.0) * (s + 1.0));
    double e = s - 1.0;
    if (e < kGradEpsFloor) e = kGradEpsFloor;
    return (1.0 - e / 4.0) / std::sqrt(2.0 * e);
}

void embed_raw(const double* chart, GeometryKind g, double* emb) {
    switch (g) {
        case GeometryKind::Euclidean:
            emb[0] = chart[0];
            emb[1] = chart[1];
            return;
        case GeometryKind::Spherical: {
            double n = std::sqrt(chart[0] * chart[0] + chart[1] * chart[1] + chart[2] * chart[2]);
            emb[0] = chart[0] / n;
            emb[1] = chart[1] / n;
            emb[2] = chart[2] / n;
            return;
        }
        case GeometryKind::Hyperboloid:
            emb[0] = std::sqrt(1.0 + chart[0] * chart[0] + chart[1] * chart[1]);
            emb[1] = chart[0];
            emb[2] = chart[1];
            return;
    }
}

double dist_raw(const double* ea, const double* eb, GeometryKind g) {
    switch (g) {
        case GeometryKind::Euclidean: {
            double dx = ea[0] - eb[0], dy = ea[1] - eb[1];
            return std::sqrt(dx * dx + dy * dy);
        }
        case GeometryKind::Spherical: {
            double t = dot3(ea, eb);
            double cx = ea[1] * eb[2] - ea[2] * eb[1];
            double cy = ea[2] * eb[0] - ea[0] * eb[2];
            double cz = ea[0] * eb[1] - ea[1] * eb[0];
            double c = std::sqrt(cx * cx + cy * cy + cz * cz);
            return std::atan2(c, t);
        }
        case GeometryKind::Hyperboloid:
            return stable_acosh_raw(lorentz_s(ea, eb));
    }
    return 0.0;
}

double dist_grad_raw(const double* ca, const double* ea, const double* cb, const double* eb,
                     GeometryKind g, double* ga, double* gb) {
    switch (g) {
        case GeometryKind::Euclidean: {
            double dx = ea[0] - eb[0], dy = ea[1] - eb[1];
            double d = std::sqrt(dx * dx + dy * dy);
            if (d < kCoincident) {
                ga[0] = ga[1] = gb[0] = gb[1] = 0.0;
                return d;
            }
            ga[0] = dx / d;
            ga[1] = dy / d;
            gb[0] = -ga[0];
            gb[1] = -ga[1];
            return d;
        }
        case GeometryKind::Spherical: {
            const double* u = ea;
            const double* v = eb;
            double t = dot3(u, v);
            double cx = u[1] * v[2] - u[2] * v[1];
            double cy = u[2] * v[0] - u[0] * v[2];
            double cz = u[0] * v[1] - u[1] * v[0];
            double c = std::sqrt(cx * cx + cy * cy + cz * cz);
            double d = std::atan2(c, t);
            if (c < kCoincident) {
                // coincident or antipodal: direction undefined, subgradient 0
                for (int i = 0; i < 3; ++i) ga[i] = gb[i] = 0.0;
                return d;
            }
            double na = norm3(ca), nb = norm3(cb);
            // grad wrt unit vectors: (t*u - v)/c, tangent at u (and symmetrically at v)
            double gu[3], gv[3];
            for (int i = 0; i < 3; ++i) {
                gu[i] = (t * u[i] - v[i]) / c;
                gv[i] = (t * v[i] - u[i]) / c;
            }
            // chain rule through normalization: project out the radial component, scale 1/|chart|
            double pu = dot3(gu, u), pv = dot3(gv, v);
            for (int i = 0; i < 3; ++i) {
                ga[i] = (gu[i] - pu * u[i]) / na;
                gb[i] = (gv[i] - pv * v[i]) / nb;
            }
            return d;
        }
        case GeometryKind::Hyperboloid: {
            double s = lorentz_s(ea, eb);
            double d = stable_acosh_raw(s);
            double gs = stable_dacosh(s);
            // ds/dchart_a = (x_k / z0_a) * z0_b - w_k
            ga[0] = gs * ((ca[0] / ea[0]) * eb[0] - eb[1]);
            ga[1] = gs * ((ca[1] / ea[0]) * eb[0] - eb[2]);
            gb[0] = gs * ((cb[0] / eb[0]) * ea[0] - ea[1]);
            gb[1] = gs * ((cb[1] / eb[0]) * ea[0] - ea[2]);
            return d;
        }
    }
    return 0.0;
}

}  // namespace manifold_detail

EmbeddedPoint embed_chart(const ChartPoint& p, GeometryKind g) {
    if (!finite3(p.v, chart_dim(g))) throw DomainError("chart point has non-finite coordinates");
    if (g == GeometryKind::Spherical) {
        double n = norm3(p.v.data());
        if (n == 0.0) throw DomainError("spherical chart point must not be the zero vector");
    }
    EmbeddedPoint out;
    manifold_detail::embed_raw(p.v.data(), g, out.v.data());
    return out;
}

double geodesic_distance(const EmbeddedPoint& a, const EmbeddedPoint& b, GeometryKind g) {
    validate_embedded(a, g);
    validate_embedded(b, g);
    double d = manifold_detail::dist_raw(a.v.data(), b.v.data(), g);
    if (std::isnan(d)) throw DomainError("hyperboloid Lorentz product below 1 - 1e-9");
    return d;
}

double stable_acosh(double s) {
    if (!(s >= 1.0 - 1e-9))
        throw DomainError("stable_acosh argument below 1 - 1e-9 (broken hyperboloid invariant)");
    return manifold_detail::stable_acosh_raw(s);
}

DistanceGradient distance_gradient_chart(const ChartPoint& a, const ChartPoint& b, GeometryKind g) {
    EmbeddedPoint ea = embed_chart(a, g);
    EmbeddedPoint eb = embed_chart(b, g);
    DistanceGradient out;
    double d = manifold_detail::dist_grad_raw(a.v.data(), ea.v.data(), b.v.data(), eb.v.data(), g,
                                              out.wrt_a.data(), out.wrt_b.data());
    if (std::isnan(d)) throw DomainError("hyperboloid Lorentz product below 1 - 1e-9");
    return out;
}

}  // namespace rggsb
