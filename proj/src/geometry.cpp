#include "lamebem/geometry.hpp"

#include "lamebem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>

namespace lamebem {

const TriangleRule& dunavant6() {
    static const TriangleRule rule = [] {
        TriangleRule r{};
        const double a1 = 0.445948490915965, b1 = 1.0 - 2.0 * a1;
        const double a2 = 0.091576213509771, b2 = 1.0 - 2.0 * a2;
        const double w1 = 0.223381589678011, w2 = 0.109951743655322;
        r.bary = {{{b1, a1, a1}, {a1, b1, a1}, {a1, a1, b1}, {b2, a2, a2}, {a2, b2, a2}, {a2, a2, b2}}};
        r.weight = {w1, w1, w1, w2, w2, w2};
        return r;
    }();
    return rule;
}

LineRule gauss_legendre01(int n) {
    if (n < 1) throw InvalidParameter("gauss_legendre01: n must be positive");
    LineRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (t * p1 - p0) / (t * t - 1.0);
        }
        r.x[n - 1 - i] = 0.5 * (1.0 + t);
        r.w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    return r;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

SurfaceMesh SurfaceMesh::from_triangles(std::vector<Vec3> vertices, std::vector<Tri> triangles) {
    SurfaceMesh m;
    m.vertices_ = std::move(vertices);
    m.triangles_ = std::move(triangles);
    m.build();
    return m;
}

void SurfaceMesh::build() {
    const int nv = num_vertices();
    const int ne = num_elements();
    if (ne == 0) throw MeshError("mesh has no triangles");
    for (const auto& t : triangles_) {
        for (int k : t)
            if (k < 0 || k >= nv) throw MeshError("triangle references vertex out of range");
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) throw MeshError("degenerate triangle");
    }

    // Each directed edge must appear once and its reverse once: closed and
    // consistently oriented.
    std::map<std::pair<int, int>, int> directed;
    for (int e = 0; e < ne; ++e)
        for (int k = 0; k < 3; ++k) {
            auto key = std::make_pair(triangles_[e][k], triangles_[e][(k + 1) % 3]);
            if (++directed[key] > 1) throw MeshError("inconsistent orientation or non-manifold edge");
        }
    for (const auto& [edge, count] : directed)
        if (!directed.count({edge.second, edge.first})) throw MeshError("surface is not closed");

    areas_.resize(ne);
    centroids_.resize(ne);
    normals_.resize(ne);
    diameters_.resize(ne);
    mesh_size_ = 0.0;
    for (int e = 0; e < ne; ++e) {
        const Vec3 a = vertex(e, 0), b = vertex(e, 1), c = vertex(e, 2);
        const Vec3 n = (b - a).cross(c - a);
        const double nn = n.norm();
        if (!(nn > 0.0)) throw MeshError("zero-area triangle");
        areas_[e] = 0.5 * nn;
        normals_[e] = n / nn;
        centroids_[e] = (a + b + c) / 3.0;
        diameters_[e] = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
        mesh_size_ = std::max(mesh_size_, diameters_[e]);
    }

    UnionFind uf(nv);
    for (const auto& t : triangles_) {
        uf.unite(t[0], t[1]);
        uf.unite(t[1], t[2]);
    }
    std::map<int, int> label;
    component_.resize(ne);
    for (int e = 0; e < ne; ++e) {
        int root = uf.find(triangles_[e][0]);
        auto it = label.find(root);
        if (it == label.end()) it = label.emplace(root, static_cast<int>(label.size())).first;
        component_[e] = it->second;
    }
    num_components_ = static_cast<int>(label.size());

    std::vector<double> vol(num_components_, 0.0);
    for (int e = 0; e < ne; ++e) vol[component_[e]] += centroids_[e].dot(normals_[e]) * areas_[e] / 3.0;
    for (double v : vol)
        if (!(v > 0.0)) throw MeshError("inward-oriented component (negative enclosed volume)");
}

Vec3 SurfaceMesh::quad_point(int e, int q) const {
    const auto& b = dunavant6().bary[q];
    return b[0] * vertex(e, 0) + b[1] * vertex(e, 1) + b[2] * vertex(e, 2);
}

double SurfaceMesh::total_area() const { return std::accumulate(areas_.begin(), areas_.end(), 0.0); }

double SurfaceMesh::volume() const {
    double v = 0.0;
    for (int e = 0; e < num_elements(); ++e) v += centroids_[e].dot(normals_[e]) * areas_[e];
    return v / 3.0;
}

Vec3 SurfaceMesh::normal_integral() const {
    Vec3 s = Vec3::Zero();
    for (int e = 0; e < num_elements(); ++e) s += areas_[e] * normals_[e];
    return s;
}

double SurfaceMesh::local_size(const Vec3& x) const {
    int best = 0;
    double bd = (centroids_[0] - x).squaredNorm();
    for (int e = 1; e < num_elements(); ++e) {
        double d = (centroids_[e] - x).squaredNorm();
        if (d < bd) {
            bd = d;
            best = e;
        }
    }
    return diameters_[best];
}

double SurfaceMesh::distance_to_surface(const Vec3& x, int* element) const {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int e = 0; e < num_elements(); ++e) {
        if ((centroids_[e] - x).norm() - diameters_[e] > best) continue;
        double d = point_triangle_distance(x, vertex(e, 0), vertex(e, 1), vertex(e, 2));
        if (d < best) {
            best = d;
            arg = e;
        }
    }
    if (element) *element = arg;
    return best;
}

std::uint64_t SurfaceMesh::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& v : vertices_) mix(v.data(), 3 * sizeof(double));
    for (const auto& t : triangles_) mix(t.data(), 3 * sizeof(int));
    return h;
}

// Closest-point distance (Ericson's region test).
bool contains(const SurfaceMesh& mesh, const Vec3& x) {
    double omega = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const Vec3 a = mesh.vertex(e, 0) - x, b = mesh.vertex(e, 1) - x, c = mesh.vertex(e, 2) - x;
        const double la = a.norm(), lb = b.norm(), lc = c.norm();
        const double num = a.dot(b.cross(c));
        const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
        omega += 2.0 * std::atan2(num, den);
    }
    return std::abs(omega) > 2.0 * M_PI;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return ap.norm();
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return bp.norm();
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return cp.norm();
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return (p - (b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b))).norm();
    const double denom = 1.0 / (va + vb + vc);
    return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

SurfaceMesh make_unit_sphere_mesh(int level) {
    if (level < 0) throw InvalidParameter("refinement level must be nonnegative");
    if (level > kMaxSphereLevel)
        throw CapacityError("sphere refinement level " + std::to_string(level) + " exceeds cap " +
                            std::to_string(kMaxSphereLevel));
    const double t = 0.5 * (1.0 + std::sqrt(5.0));
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) p.normalize();
    std::vector<Tri> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                          {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                          {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                          {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            int id = static_cast<int>(v.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<Tri> g;
        g.reserve(4 * f.size());
        for (const auto& tr : f) {
            int a = midpoint(tr[0], tr[1]), b = midpoint(tr[1], tr[2]), c = midpoint(tr[2], tr[0]);
            g.push_back({tr[0], a, c});
            g.push_back({tr[1], b, a});
            g.push_back({tr[2], c, b});
            g.push_back({a, b, c});
        }
        f.swap(g);
    }
    return SurfaceMesh::from_triangles(std::move(v), std::move(f));
}

SurfaceMesh scale_translate(const SurfaceMesh& mesh, const BodyFrame& frame) {
    if (!(frame.delta > 0.0)) throw InvalidParameter("scale factor delta must be positive");
    std::vector<Vec3> v = mesh.vertices();
    for (auto& p : v) p = frame.delta * p + frame.center;
    return SurfaceMesh::from_triangles(std::move(v), mesh.triangles());
}

SurfaceMesh merge(const std::vector<SurfaceMesh>& parts) {
    std::vector<Vec3> v;
    std::vector<Tri> f;
    for (const auto& m : parts) {
        const int off = static_cast<int>(v.size());
        v.insert(v.end(), m.vertices().begin(), m.vertices().end());
        for (auto t : m.triangles()) f.push_back({t[0] + off, t[1] + off, t[2] + off});
    }
    return SurfaceMesh::from_triangles(std::move(v), std::move(f));
}

SurfaceMesh read_off(std::istream& in) {
    auto next_line = [&in](std::string& line) {
        while (std::getline(in, line)) {
            auto pos = line.find('#');
            if (pos != std::string::npos) line.erase(pos);
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    std::string line;
    if (!next_line(line)) throw MeshError("OFF: empty input");
    std::istringstream hs(line);
    std::string magic;
    hs >> magic;
    if (magic != "OFF") throw MeshError("OFF: missing header");
    long nv = -1, nf = -1, ne = 0;
    if (!(hs >> nv)) {
        if (!next_line(line)) throw MeshError("OFF: missing counts");
        std::istringstream cs(line);
        cs >> nv >> nf >> ne;
    } else {
        hs >> nf >> ne;
    }
    if (nv <= 0 || nf <= 0) throw MeshError("OFF: invalid counts");
    std::vector<Vec3> v(nv);
    for (long i = 0; i < nv; ++i) {
        if (!next_line(line)) throw MeshError("OFF: truncated vertex list");
        std::istringstream ls(line);
        if (!(ls >> v[i][0] >> v[i][1] >> v[i][2])) throw MeshError("OFF: bad vertex line");
    }
    std::vector<Tri> f(nf);
    for (long i = 0; i < nf; ++i) {
        if (!next_line(line)) throw MeshError("OFF: truncated face list");
        std::istringstream ls(line);
        int k = 0;
        if (!(ls >> k) || k != 3) throw MeshError("OFF: only triangular faces are supported");
        if (!(ls >> f[i][0] >> f[i][1] >> f[i][2])) throw MeshError("OFF: bad face line");
    }
    return SurfaceMesh::from_triangles(std::move(v), std::move(f));
}

SurfaceMesh read_off_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open OFF file: " + path);
    return read_off(in);
}

void write_off(const SurfaceMesh& mesh, std::ostream& out) {
    char buf[128];
    out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_elements() << " 0\n";
    for (const auto& p : mesh.vertices()) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
        out << buf;
    }
    for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_off_file(const SurfaceMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write OFF file: " + path);
    write_off(mesh, out);
}

}  // namespace lamebem
