#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "ddm/rng.hpp"

namespace ddm {

// Point clouds are d x n matrices, one point per column.
using Cloud = Eigen::MatrixXd;

struct Dirac {
    Eigen::VectorXd point;
};

struct Empirical {
    Cloud atoms;  // d x N
};

// Uniform on [-side/2, side/2]^p x {0}^(d-p).
struct Hypercube {
    int p = 1;
    int d = 1;
    double side = 1.0;
};

// Uniform on the circle of given radius around center, in the (e1, e2) plane.
struct Circle {
    double radius = 1.0;
    Eigen::VectorXd center;
};

struct TargetMeta {
    double diam = 0.0;
    double minkowski_dim = 0.0;
};

class CompactTarget {
public:
    using Variant = std::variant<Dirac, Empirical, Hypercube, Circle>;

    static CompactTarget dirac(Eigen::VectorXd point);
    static CompactTarget empirical(Cloud atoms);
    static CompactTarget hypercube(int p, int d, double side = 1.0);
    static CompactTarget circle(double radius, Eigen::VectorXd center);

    const Variant& variant() const { return v_; }
    int dim() const { return d_; }
    std::string name() const;

    Cloud sample(std::size_t n, std::uint64_t seed) const;
    Eigen::VectorXd sample_one(Stream& rng) const;

    double diameter() const;
    TargetMeta meta() const;

    CompactTarget as_empirical(std::size_t N, std::uint64_t seed) const;

    // Nearest point of the support to x.
    Eigen::VectorXd project(const Eigen::VectorXd& x) const;
    bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const;

    // Center of (an approximation to) the minimum enclosing ball of the support.
    Eigen::VectorXd chebyshev_center() const;
    CompactTarget translated(const Eigen::VectorXd& shift) const;
    CompactTarget recentered() const { return translated(-chebyshev_center()); }
    // Distance from the origin to the support; zero when 0 is a support point.
    double origin_gap() const { return project(Eigen::VectorXd::Zero(d_)).norm(); }
    // Largest norm of a support point.
    double support_radius() const;

private:
    CompactTarget(Variant v, int d) : v_(std::move(v)), d_(d) {}
    Variant v_;
    int d_;
};

// One point per row, d comma-separated decimal columns.
CompactTarget load_atoms_csv(const std::string& path);

}  // namespace ddm
