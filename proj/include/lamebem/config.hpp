#pragma once

#include "lamebem/transmission.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lamebem {

inline constexpr const char* kVersion = "lamebem 0.1.0";

struct SweepConfig {
    int mode = -1;  // -1: automatic selection
    std::optional<double> c0;
    std::optional<double> control_c0;
    std::vector<double> taus = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
};

// JSON run configuration; the schema is described in README.md.
struct RunConfig {
    int sphere_level = -1;
    std::string off_path;
    LameParams params;
    double omega = 1.0;
    cplx contrast = 3.0;
    double delta = 0.1;
    Vec3 center = Vec3::Zero();
    std::vector<Vec3> source_locations;
    std::vector<Vec3c> source_amplitudes;
    std::vector<Vec3> probes;
    SweepConfig sweep;
    std::string output_dir;
    std::uint64_t seed = 0;
    std::string hash;  // 16 hex digits over the canonical form of the input

    PointForceSource source() const { return {source_locations, source_amplitudes, omega}; }
    BodyFrame frame() const { return {delta, center}; }
    // Reference shape B (before scaling by delta).
    SurfaceMesh reference_mesh() const;
};

// Strict parsing: unknown keys, wrong types and physical violations are all
// collected and thrown together as ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

std::string hash_hex(std::uint64_t h);
std::uint64_t fnv1a(const std::string& s);

}  // namespace lamebem
