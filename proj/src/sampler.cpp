#include "pinnflow/sampler.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace pinnflow {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// cell-center coordinate i of n cells over [lo, hi]; centers never land on
// face edges, so boundary populations stay disjoint at duct corners
double center(double lo, double hi, int i, int n) {
    return lo + (hi - lo) * (i + 0.5) / n;
}

struct Builder {
    CollocationSet set;

    explicit Builder(int n_sd) { set.n_sd = n_sd; }

    void volume(const double* x) {
        set.volume_x.insert(set.volume_x.end(), x, x + set.n_sd);
    }
    void dirichlet(const double* x, const double* v, double area) {
        set.dirichlet_x.insert(set.dirichlet_x.end(), x, x + set.n_sd);
        set.dirichlet_v.insert(set.dirichlet_v.end(), v, v + set.n_sd);
        set.dirichlet_area.push_back(area);
    }
    void moving(const double* x, const double* v, double area) {
        set.moving_x.insert(set.moving_x.end(), x, x + set.n_sd);
        set.moving_v.insert(set.moving_v.end(), v, v + set.n_sd);
        set.moving_area.push_back(area);
    }
    void neumann(const double* x, double p, double area) {
        set.neumann_x.insert(set.neumann_x.end(), x, x + set.n_sd);
        set.neumann_p.push_back(p);
        set.neumann_area.push_back(area);
    }
};

// no-slip rectangle grid in the plane spanned by axes (a0, a1); the fixed
// coordinate sits at index "fixed_axis"
void noslip_face(Builder& b, int fixed_axis, double fixed, int a0, double lo0, double hi0,
                 int a1, double lo1, double hi1, int n0, int n1, bool moving = false) {
    const double zero[3] = {0.0, 0.0, 0.0};
    double cell = ((hi0 - lo0) / n0) * ((hi1 - lo1) / n1);
    for (int i = 0; i < n0; ++i) {
        for (int j = 0; j < n1; ++j) {
            double x[3] = {0.0, 0.0, 0.0};
            x[fixed_axis] = fixed;
            x[a0] = center(lo0, hi0, i, n0);
            x[a1] = center(lo1, hi1, j, n1);
            if (moving) {
                b.moving(x, zero, cell);
            } else {
                b.dirichlet(x, zero, cell);
            }
        }
    }
}

} // namespace

void channel2d_solution(double x, double y, double& u, double& v, double& p) {
    u = 1.0 - 4.0 * y * y;
    v = 0.0;
    p = 0.16 * (2.0 - x);
}

CollocationSet sample_channel2d(int n_volume, std::uint64_t seed) {
    if (n_volume < 0) throw std::invalid_argument("n_volume must be >= 0");
    const double x_lo = 0.0, x_hi = 2.0, y_lo = -0.5, y_hi = 0.5;
    Builder b(2);
    Rng rng(seed);
    for (int i = 0; i < n_volume; ++i) {
        double x[2] = {rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)};
        b.volume(x);
    }
    int ny = 35, nx = 70;
    double dy = (y_hi - y_lo) / ny, dx = (x_hi - x_lo) / nx;
    for (int i = 0; i < ny; ++i) { // inlet, parabolic profile
        double y = center(y_lo, y_hi, i, ny);
        double x[2] = {x_lo, y};
        double v[2] = {1.0 - 4.0 * y * y, 0.0};
        b.dirichlet(x, v, dy);
    }
    const double zero[2] = {0.0, 0.0};
    for (int i = 0; i < nx; ++i) { // no-slip walls
        double xw = center(x_lo, x_hi, i, nx);
        double lo[2] = {xw, y_lo}, hi[2] = {xw, y_hi};
        b.dirichlet(lo, zero, dx);
        b.dirichlet(hi, zero, dx);
    }
    for (int i = 0; i < ny; ++i) { // pressure outlet
        double x[2] = {x_hi, center(y_lo, y_hi, i, ny)};
        b.neumann(x, 0.0, dy);
    }
    return b.set;
}

ReferenceCloud channel2d_reference(const std::vector<double>& points_xy) {
    if (points_xy.size() % 2 != 0)
        throw std::invalid_argument("points_xy must hold 2D coordinates");
    ReferenceCloud c;
    c.n_sd = 2;
    c.x = points_xy;
    int n = c.n_points();
    c.v.resize(2 * static_cast<std::size_t>(n));
    c.p.resize(n);
    for (int i = 0; i < n; ++i) {
        channel2d_solution(c.x[2 * i], c.x[2 * i + 1], c.v[2 * i], c.v[2 * i + 1], c.p[i]);
    }
    return c;
}

CollocationSet sample_cylinder3d(int n_volume, std::uint64_t seed, bool parametric) {
    if (n_volume < 0) throw std::invalid_argument("n_volume must be >= 0");
    const double x_lo = -0.15, x_hi = 0.95;  // tunnel length 1.1, inlet 0.15
    const double y_lo = -0.15, y_hi = 0.26;  // height 0.41, axis offset 0.15
    const double z_lo = 0.0, z_hi = 0.4;     // depth
    const double radius = 0.05;              // D = 0.1
    const double y_mid = 0.5 * (y_lo + y_hi);
    const double k_lo = parametric ? -0.05 : 0.0;
    const double k_hi = parametric ? 0.05 : 0.0;
    const double H = y_hi - y_lo, W = z_hi - z_lo;

    // distance in the xy-plane to the segment of cylinder centers
    auto clearance = [&](double x, double y) {
        double yk = std::min(std::max(y, k_lo), k_hi);
        return std::hypot(x, y - yk);
    };
    auto inflow = [&](double y, double z) {
        double yc = y - y_mid;
        return 16.0 / (H * H * W * W) * (0.5 * H - yc) * (0.5 * H + yc) * (W - z) * z;
    };

    Builder b(3);
    Rng rng(seed);
    // 30% of the volume points refine an annulus around the cylinder
    // positions, the rest fill the tunnel uniformly
    int n_ring = (3 * n_volume) / 10;
    int placed = 0;
    while (placed < n_volume - n_ring) {
        double x[3] = {rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi), rng.uniform(z_lo, z_hi)};
        if (clearance(x[0], x[1]) < radius) continue;
        b.volume(x);
        ++placed;
    }
    placed = 0;
    while (placed < n_ring) {
        double r = std::sqrt(rng.uniform(radius * radius, 4.0 * radius * radius));
        double th = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        double kc = parametric ? rng.uniform(k_lo, k_hi) : 0.0;
        double x[3] = {r * std::cos(th), kc + r * std::sin(th), rng.uniform(z_lo, z_hi)};
        if (x[1] < y_lo || x[1] > y_hi) continue;
        if (clearance(x[0], x[1]) < radius) continue;
        b.volume(x);
        ++placed;
    }

    int nf = 12;                     // inlet/outlet face grid
    int nx = 28, ny = 11, nz = 10;   // wall grids
    for (int i = 0; i < nf; ++i) {   // inlet, bi-quadratic profile
        for (int j = 0; j < nf; ++j) {
            double x[3] = {x_lo, center(y_lo, y_hi, i, nf), center(z_lo, z_hi, j, nf)};
            double v[3] = {inflow(x[1], x[2]), 0.0, 0.0};
            b.dirichlet(x, v, (H / nf) * (W / nf));
        }
    }
    noslip_face(b, 1, y_lo, 0, x_lo, x_hi, 2, z_lo, z_hi, nx, nz); // bottom wall
    noslip_face(b, 1, y_hi, 0, x_lo, x_hi, 2, z_lo, z_hi, nx, nz); // top wall
    noslip_face(b, 2, z_lo, 0, x_lo, x_hi, 1, y_lo, y_hi, nx, ny); // side walls
    noslip_face(b, 2, z_hi, 0, x_lo, x_hi, 1, y_lo, y_hi, nx, ny);
    int nth = 24, ncz = 10; // cylinder surface, as-built at k = 0
    const double zero[3] = {0.0, 0.0, 0.0};
    double cyl_cell = (2.0 * 3.14159265358979323846 * radius / nth) * (W / ncz);
    for (int i = 0; i < nth; ++i) {
        double th = 2.0 * 3.14159265358979323846 * (i + 0.5) / nth;
        for (int j = 0; j < ncz; ++j) {
            double x[3] = {radius * std::cos(th), radius * std::sin(th),
                           center(z_lo, z_hi, j, ncz)};
            if (parametric) {
                b.moving(x, zero, cyl_cell);
            } else {
                b.dirichlet(x, zero, cyl_cell);
            }
        }
    }
    for (int i = 0; i < nf; ++i) { // pressure outlet
        for (int j = 0; j < nf; ++j) {
            double x[3] = {x_hi, center(y_lo, y_hi, i, nf), center(z_lo, z_hi, j, nf)};
            b.neumann(x, 0.0, (H / nf) * (W / nf));
        }
    }
    return b.set;
}

CollocationSet sample_tjunction3d(int n_volume, std::uint64_t seed) {
    if (n_volume < 0) throw std::invalid_argument("n_volume must be >= 0");
    const double x_lo = -0.15, x_hi = 0.15; // duct length L = 0.3
    const double duct = 0.045;              // inlet duct half-width L_IN/2
    const double H = 0.2;                   // inlet duct top
    const double h_right = 0.08;            // right arm height H_R
    const double k_as_built = 0.03, k_max = 0.07;
    const double z_lo = 0.0, z_hi = 0.1;    // depth W
    const double W = z_hi - z_lo;

    // fluid region swept over k in [0.03, 0.07]: left arm up to k_max, right
    // arm up to h_right, full inlet column; the epoch filter trims the left
    // arm down to the sampled k
    auto inside_sweep = [&](double x, double y) {
        if (x < -duct) return y <= k_max;
        if (x > duct) return y <= h_right;
        return y <= H;
    };

    Builder b(3);
    Rng rng(seed);
    int placed = 0;
    while (placed < n_volume) {
        double x[3] = {rng.uniform(x_lo, x_hi), rng.uniform(0.0, H), rng.uniform(z_lo, z_hi)};
        if (!inside_sweep(x[0], x[1])) continue;
        b.volume(x);
        ++placed;
    }

    int nx_arm = 12, nz = 8, n_in = 10;
    noslip_face(b, 1, 0.0, 0, x_lo, x_hi, 2, z_lo, z_hi, 3 * nx_arm, nz); // floor
    noslip_face(b, 1, h_right, 0, duct, x_hi, 2, z_lo, z_hi, nx_arm, nz); // right ceiling
    noslip_face(b, 0, duct, 1, h_right, H, 2, z_lo, z_hi, nx_arm, nz);    // inlet right wall
    // moving pieces, as-built at k = 0.03: left ceiling + inlet left wall
    noslip_face(b, 1, k_as_built, 0, x_lo, -duct, 2, z_lo, z_hi, nx_arm, nz, true);
    noslip_face(b, 0, -duct, 1, k_as_built, H, 2, z_lo, z_hi, nx_arm, nz, true);
    // front/back walls cover the swept fluid region; the k filter trims them
    for (int i = 0; i < 3 * nx_arm; ++i) {
        for (int j = 0; j < 2 * nz; ++j) {
            double xw = center(x_lo, x_hi, i, 3 * nx_arm);
            double yw = center(0.0, H, j, 2 * nz);
            if (!inside_sweep(xw, yw)) continue;
            const double zero[3] = {0.0, 0.0, 0.0};
            double cell = ((x_hi - x_lo) / (3 * nx_arm)) * (H / (2 * nz));
            double front[3] = {xw, yw, z_lo}, back[3] = {xw, yw, z_hi};
            b.dirichlet(front, zero, cell);
            b.dirichlet(back, zero, cell);
        }
    }
    for (int i = 0; i < n_in; ++i) { // downward bi-quadratic inflow at y = H
        for (int j = 0; j < n_in; ++j) {
            double x[3] = {center(-duct, duct, i, n_in), H, center(z_lo, z_hi, j, n_in)};
            double vmag = 16.0 / ((2 * duct) * (2 * duct) * W * W) * (duct - x[0]) *
                          (duct + x[0]) * (W - x[2]) * x[2];
            double v[3] = {0.0, -vmag, 0.0};
            b.dirichlet(x, v, (2 * duct / n_in) * (W / n_in));
        }
    }
    int n_oy = 8; // outlets span the swept arm heights; the k filter trims the left one
    for (int i = 0; i < n_oy; ++i) {
        for (int j = 0; j < nz; ++j) {
            double left[3] = {x_lo, center(0.0, k_max, i, n_oy), center(z_lo, z_hi, j, nz)};
            b.neumann(left, 0.0, (k_max / n_oy) * (W / nz));
            double right[3] = {x_hi, center(0.0, h_right, i, n_oy), center(z_lo, z_hi, j, nz)};
            b.neumann(right, 0.0, (h_right / n_oy) * (W / nz));
        }
    }
    return b.set;
}

CollocationSet sample_case(const std::string& name, int n_volume, std::uint64_t seed) {
    if (name == "channel2d") return sample_channel2d(n_volume, seed);
    if (name == "cylinder3d") return sample_cylinder3d(n_volume, seed, false);
    if (name == "cylinder3d-parametric") return sample_cylinder3d(n_volume, seed, true);
    if (name == "tjunction3d") return sample_tjunction3d(n_volume, seed);
    throw ConfigError("unknown sample case '" + name +
                      "' (expected channel2d, cylinder3d, cylinder3d-parametric or tjunction3d)");
}

namespace {

void write_rows(std::ofstream& out, int n_sd, const std::vector<double>& x, const char* tag,
                const std::vector<double>* v, const std::vector<double>* p,
                const std::vector<double>& area) {
    int n = static_cast<int>(x.size()) / n_sd;
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < n_sd; ++d) out << g17(x[i * n_sd + d]) << ',';
        out << tag;
        for (int d = 0; d < n_sd; ++d) {
            out << ',';
            if (v) out << g17((*v)[i * n_sd + d]);
        }
        out << ',';
        if (p) out << g17((*p)[i]);
        out << ',';
        if (!area.empty() && std::isfinite(area[i])) out << g17(area[i]);
        out << '\n';
    }
}

} // namespace

void write_point_csv(const std::string& path, const CollocationSet& set) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << (set.n_sd == 3 ? "x,y,z,set,vx,vy,vz,p,area" : "x,y,set,vx,vy,p,area") << '\n';
    write_rows(out, set.n_sd, set.volume_x, "f", nullptr, nullptr, {});
    write_rows(out, set.n_sd, set.dirichlet_x, "D", &set.dirichlet_v, nullptr, set.dirichlet_area);
    write_rows(out, set.n_sd, set.neumann_x, "N", nullptr, &set.neumann_p, set.neumann_area);
    write_rows(out, set.n_sd, set.moving_x, "M", &set.moving_v, nullptr, set.moving_area);
    if (!out) throw ConfigError("write to '" + path + "' failed");
}

void write_reference_csv(const std::string& path, const ReferenceCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    bool fields = cloud.has_fields();
    if (cloud.n_sd == 3) {
        out << (fields ? "x,y,z,vx,vy,vz,p" : "x,y,z");
    } else {
        out << (fields ? "x,y,vx,vy,p" : "x,y");
    }
    out << '\n';
    int n = cloud.n_points();
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < cloud.n_sd; ++d) {
            if (d) out << ',';
            out << g17(cloud.x[i * cloud.n_sd + d]);
        }
        if (fields) {
            for (int d = 0; d < cloud.n_sd; ++d) out << ',' << g17(cloud.v[i * cloud.n_sd + d]);
            out << ',' << g17(cloud.p[i]);
        }
        out << '\n';
    }
    if (!out) throw ConfigError("write to '" + path + "' failed");
}

} // namespace pinnflow
