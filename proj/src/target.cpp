#include "ddm/target.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "ddm/errors.hpp"

namespace ddm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

CompactTarget CompactTarget::dirac(Eigen::VectorXd point) {
    if (point.size() < 1) throw ConfigError("Dirac target needs d >= 1");
    const int d = static_cast<int>(point.size());
    return CompactTarget(Dirac{std::move(point)}, d);
}

CompactTarget CompactTarget::empirical(Cloud atoms) {
    if (atoms.cols() < 1) throw ConfigError("Empirical target needs at least one atom");
    if (atoms.rows() < 1) throw ConfigError("Empirical target needs d >= 1");
    if (!atoms.allFinite()) throw ConfigError("Empirical atoms must be finite");
    const int d = static_cast<int>(atoms.rows());
    return CompactTarget(Empirical{std::move(atoms)}, d);
}

CompactTarget CompactTarget::hypercube(int p, int d, double side) {
    if (p < 1 || p > d) throw ConfigError("Hypercube needs 1 <= p <= d");
    if (!(side > 0.0)) throw ConfigError("Hypercube needs side > 0");
    return CompactTarget(Hypercube{p, d, side}, d);
}

CompactTarget CompactTarget::circle(double radius, Eigen::VectorXd center) {
    if (center.size() < 2) throw ConfigError("Circle needs ambient dimension >= 2");
    if (!(radius > 0.0)) throw ConfigError("Circle needs radius > 0");
    const int d = static_cast<int>(center.size());
    return CompactTarget(Circle{radius, std::move(center)}, d);
}

std::string CompactTarget::name() const {
    return std::visit(overloaded{
                          [](const Dirac&) { return std::string("dirac"); },
                          [](const Empirical& e) { return "empirical(" + std::to_string(e.atoms.cols()) + ")"; },
                          [](const Hypercube& h) { return "hypercube(p=" + std::to_string(h.p) + ")"; },
                          [](const Circle&) { return std::string("circle"); },
                      },
                      v_);
}

Eigen::VectorXd CompactTarget::sample_one(Stream& rng) const {
    return std::visit(overloaded{
                          [&](const Dirac& a) -> Eigen::VectorXd { return a.point; },
                          [&](const Empirical& e) -> Eigen::VectorXd {
                              return e.atoms.col(static_cast<Eigen::Index>(rng.index(e.atoms.cols())));
                          },
                          [&](const Hypercube& h) -> Eigen::VectorXd {
                              Eigen::VectorXd x = Eigen::VectorXd::Zero(h.d);
                              for (int i = 0; i < h.p; ++i) x[i] = h.side * (rng.uniform() - 0.5);
                              return x;
                          },
                          [&](const Circle& c) -> Eigen::VectorXd {
                              const double th = 2.0 * std::numbers::pi * rng.uniform();
                              Eigen::VectorXd x = c.center;
                              x[0] += c.radius * std::cos(th);
                              x[1] += c.radius * std::sin(th);
                              return x;
                          },
                      },
                      v_);
}

Cloud CompactTarget::sample(std::size_t n, std::uint64_t seed) const {
    Stream rng(seed);
    Cloud out(d_, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) out.col(static_cast<Eigen::Index>(i)) = sample_one(rng);
    return out;
}

double CompactTarget::diameter() const {
    return std::visit(overloaded{
                          [](const Dirac&) { return 0.0; },
                          [](const Empirical& e) {
                              double best = 0.0;
                              const auto N = e.atoms.cols();
                              for (Eigen::Index i = 0; i < N; ++i)
                                  for (Eigen::Index j = i + 1; j < N; ++j)
                                      best = std::max(best, (e.atoms.col(i) - e.atoms.col(j)).squaredNorm());
                              return std::sqrt(best);
                          },
                          [](const Hypercube& h) { return h.side * std::sqrt(static_cast<double>(h.p)); },
                          [](const Circle& c) { return 2.0 * c.radius; },
                      },
                      v_);
}

TargetMeta CompactTarget::meta() const {
    TargetMeta m;
    m.diam = diameter();
    m.minkowski_dim = std::visit(overloaded{
                                     [](const Dirac&) { return 0.0; },
                                     [](const Empirical&) { return 0.0; },
                                     [](const Hypercube& h) { return static_cast<double>(h.p); },
                                     [](const Circle&) { return 1.0; },
                                 },
                                 v_);
    return m;
}

CompactTarget CompactTarget::as_empirical(std::size_t N, std::uint64_t seed) const {
    if (N < 1) throw DomainError("as_empirical needs N >= 1");
    return empirical(sample(N, seed));
}

Eigen::VectorXd CompactTarget::project(const Eigen::VectorXd& x) const {
    if (x.size() != d_) throw DomainError("project: dimension mismatch");
    return std::visit(overloaded{
                          [&](const Dirac& a) -> Eigen::VectorXd { return a.point; },
                          [&](const Empirical& e) -> Eigen::VectorXd {
                              Eigen::Index best = 0;
                              (e.atoms.colwise() - x).colwise().squaredNorm().minCoeff(&best);
                              return e.atoms.col(best);
                          },
                          [&](const Hypercube& h) -> Eigen::VectorXd {
                              Eigen::VectorXd y = Eigen::VectorXd::Zero(h.d);
                              for (int i = 0; i < h.p; ++i) y[i] = std::clamp(x[i], -h.side / 2, h.side / 2);
                              return y;
                          },
                          [&](const Circle& c) -> Eigen::VectorXd {
                              Eigen::VectorXd y = c.center;
                              Eigen::Vector2d v(x[0] - c.center[0], x[1] - c.center[1]);
                              const double r = v.norm();
                              // every circle point is nearest when x sits on the axis
                              if (r == 0.0) v = Eigen::Vector2d(1.0, 0.0);
                              else v /= r;
                              y[0] += c.radius * v[0];
                              y[1] += c.radius * v[1];
                              return y;
                          },
                      },
                      v_);
}

bool CompactTarget::contains(const Eigen::VectorXd& x, double tol) const {
    return (x - project(x)).norm() <= tol;
}

Eigen::VectorXd CompactTarget::chebyshev_center() const {
    return std::visit(overloaded{
                          [](const Dirac& a) -> Eigen::VectorXd { return a.point; },
                          [](const Empirical& e) -> Eigen::VectorXd {
                              // Badoiu-Clarkson iteration for the minimum enclosing ball
                              Eigen::VectorXd c = e.atoms.col(0);
                              for (int it = 1; it <= 2000; ++it) {
                                  Eigen::Index far = 0;
                                  (e.atoms.colwise() - c).colwise().squaredNorm().maxCoeff(&far);
                                  c += (e.atoms.col(far) - c) / static_cast<double>(it + 1);
                              }
                              return c;
                          },
                          [](const Hypercube& h) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(h.d); },
                          [](const Circle& c) -> Eigen::VectorXd { return c.center; },
                      },
                      v_);
}

CompactTarget CompactTarget::translated(const Eigen::VectorXd& shift) const {
    if (shift.size() != d_) throw DomainError("translated: dimension mismatch");
    return std::visit(overloaded{
                          [&](const Dirac& a) { return dirac(a.point + shift); },
                          [&](const Empirical& e) { return empirical(e.atoms.colwise() + shift); },
                          [&](const Hypercube& h) {
                              if (shift.norm() != 0.0)
                                  throw UnsupportedOperation("hypercube targets are centered by construction");
                              return hypercube(h.p, h.d, h.side);
                          },
                          [&](const Circle& c) { return circle(c.radius, c.center + shift); },
                      },
                      v_);
}

double CompactTarget::support_radius() const {
    return std::visit(overloaded{
                          [](const Dirac& a) { return a.point.norm(); },
                          [](const Empirical& e) { return std::sqrt(e.atoms.colwise().squaredNorm().maxCoeff()); },
                          [](const Hypercube& h) { return 0.5 * h.side * std::sqrt(static_cast<double>(h.p)); },
                          [](const Circle& c) {
                              Eigen::Vector2d c2(c.center[0], c.center[1]);
                              const double rest = c.center.tail(c.center.size() - 2).squaredNorm();
                              const double far = c2.norm() + c.radius;
                              return std::sqrt(far * far + rest);
                          },
                      },
                      v_);
}

CompactTarget load_atoms_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open atoms file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError("atoms file has no rows: " + path);
    Cloud atoms(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t i = 0; i < rows[j].size(); ++i)
            atoms(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[j][i];
    return CompactTarget::empirical(std::move(atoms));
}

}  // namespace ddm
