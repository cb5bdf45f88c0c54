#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace ddm {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed of sub-stream `stream` under `master`. Trajectory i uses derive_seed(master, i).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

// mt19937_64 plus a standard normal sampler; one per independent stream.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    double normal() { return n01_(eng_); }
    double uniform() { return u01_(eng_); }

    Eigen::VectorXd normal_vec(Eigen::Index d) {
        Eigen::VectorXd z(d);
        for (Eigen::Index i = 0; i < d; ++i) z[i] = normal();
        return z;
    }

    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_);
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> n01_;
    std::uniform_real_distribution<double> u01_{0.0, 1.0};
};

}  // namespace ddm
