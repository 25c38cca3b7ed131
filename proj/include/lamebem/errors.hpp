#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lamebem {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error { using Error::Error; };
class SingularPoint : public Error { using Error::Error; };
class CapacityError : public Error { using Error::Error; };
class MeshError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class PoleError : public Error { using Error::Error; };
class UnsupportedOrder : public Error { using Error::Error; };
class SpectralInconsistency : public Error { using Error::Error; };
class InsufficientData : public Error { using Error::Error; };
class AssemblyFault : public Error { using Error::Error; };
class SolverError : public Error { using Error::Error; };

class NearFieldError : public Error {
public:
    NearFieldError(const std::string& msg, double distance, double guard)
        : Error(msg), distance_(distance), guard_(guard) {}
    double distance() const { return distance_; }
    double guard() const { return guard_; }

private:
    double distance_;
    double guard_;
};

// Carries every violation found while validating a configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}
    const std::vector<std::string>& violations() const { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid configuration:";
        for (const auto& e : v) s += "\n  - " + e;
        return s;
    }
    std::vector<std::string> violations_;
};

class DependencyError : public Error {
public:
    explicit DependencyError(const std::string& artifact)
        : Error("missing prerequisite artifact: " + artifact), artifact_(artifact) {}
    const std::string& artifact() const { return artifact_; }

private:
    std::string artifact_;
};

}  // namespace lamebem
