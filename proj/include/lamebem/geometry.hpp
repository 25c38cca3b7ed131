#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lamebem {

using Vec3 = Eigen::Vector3d;
using Tri = std::array<int, 3>;

inline constexpr int kQuadPoints = 6;
inline constexpr int kMaxSphereLevel = 6;

// Symmetric degree-4 rule on the reference triangle; barycentric coordinates
// and weights normalized to sum to one.
struct TriangleRule {
    std::array<std::array<double, 3>, kQuadPoints> bary;
    std::array<double, kQuadPoints> weight;
};
const TriangleRule& dunavant6();

// Gauss-Legendre nodes and weights on [0,1].
struct LineRule {
    std::vector<double> x;
    std::vector<double> w;
};
LineRule gauss_legendre01(int n);

struct BodyFrame {
    double delta = 1.0;
    Vec3 center = Vec3::Zero();
};

class SurfaceMesh {
public:
    SurfaceMesh() = default;

    // Validates closure, consistent orientation and outward normals.
    static SurfaceMesh from_triangles(std::vector<Vec3> vertices, std::vector<Tri> triangles);

    int num_elements() const { return static_cast<int>(triangles_.size()); }
    int num_vertices() const { return static_cast<int>(vertices_.size()); }
    int num_dofs() const { return 3 * num_elements(); }
    int num_components() const { return num_components_; }

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Tri>& triangles() const { return triangles_; }
    const std::vector<double>& areas() const { return areas_; }
    const std::vector<Vec3>& centroids() const { return centroids_; }
    const std::vector<Vec3>& normals() const { return normals_; }
    const std::vector<double>& diameters() const { return diameters_; }
    const std::vector<int>& component() const { return component_; }

    Vec3 vertex(int e, int k) const { return vertices_[triangles_[e][k]]; }
    Vec3 quad_point(int e, int q) const;
    double quad_weight(int e, int q) const { return areas_[e] * dunavant6().weight[q]; }

    double total_area() const;
    // Divergence-theorem estimate of the enclosed volume.
    double volume() const;
    Vec3 normal_integral() const;
    // Largest element diameter; the "h" used by near-field guards.
    double mesh_size() const { return mesh_size_; }
    // Diameter of the element nearest to x (by centroid).
    double local_size(const Vec3& x) const;
    // Distance from x to the nearest surface point, and that element.
    double distance_to_surface(const Vec3& x, int* element = nullptr) const;
    std::uint64_t hash() const;

private:
    void build();

    std::vector<Vec3> vertices_;
    std::vector<Tri> triangles_;
    std::vector<double> areas_;
    std::vector<Vec3> centroids_;
    std::vector<Vec3> normals_;
    std::vector<double> diameters_;
    std::vector<int> component_;
    int num_components_ = 0;
    double mesh_size_ = 0.0;
};

SurfaceMesh make_unit_sphere_mesh(int refinement_level);
SurfaceMesh scale_translate(const SurfaceMesh& mesh, const BodyFrame& frame);
SurfaceMesh merge(const std::vector<SurfaceMesh>& parts);

SurfaceMesh read_off(std::istream& in);
SurfaceMesh read_off_file(const std::string& path);
void write_off(const SurfaceMesh& mesh, std::ostream& out);
void write_off_file(const SurfaceMesh& mesh, const std::string& path);

// Winding-number test; meaningful for points off the surface.
bool contains(const SurfaceMesh& mesh, const Vec3& x);

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace lamebem
