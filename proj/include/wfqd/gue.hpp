#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

#include "wfqd/qcore.hpp"

namespace wfqd {

enum class SubsystemTag : std::uint8_t { F = 1, E = 2, C = 3, EC = 4, D = 5, ED = 6 };

/// Coordinates of one random conditional Hamiltonian inside an ensemble run.
struct SeedPath {
    std::uint64_t master_seed = 0;
    std::uint64_t sample_index = 0;
    SubsystemTag subsystem = SubsystemTag::F;
    std::uint64_t site_index = 0;
    std::uint64_t outcome_index = 0;

    friend bool operator==(const SeedPath&, const SeedPath&) = default;

    /// 64-bit stream key; a SplitMix64 finalizer chain over the fields.
    std::uint64_t key() const {
        std::uint64_t h = mix(master_seed ^ 0x5851f42d4c957f2dULL);
        h = mix(h ^ sample_index);
        h = mix(h ^ static_cast<std::uint64_t>(subsystem));
        h = mix(h ^ site_index);
        h = mix(h ^ outcome_index);
        return h;
    }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

inline SeedPath derive_path(std::uint64_t master_seed, std::uint64_t sample_index,
                            SubsystemTag tag, std::uint64_t site_index,
                            std::uint64_t outcome_index) {
    return SeedPath{master_seed, sample_index, tag, site_index, outcome_index};
}

/// Standard normal variates from a fixed engine. Box-Muller keeps the stream
/// identical across standard library implementations.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t key) : engine_(key) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// (X + X†)/2 with Re and Im of every X entry i.i.d. N(0, 1); no 1/sqrt(dim) scaling.
inline HermitianOperator gue_sample(Eigen::Index dim, NormalStream& normals) {
    if (dim < 1) throw std::invalid_argument("gue_sample: dim must be >= 1");
    Matrix x(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double re = normals.next();
            const double im = normals.next();
            x(i, j) = cplx(re, im);
        }
    }
    return HermitianOperator(x);
}

inline HermitianOperator gue_sample(Eigen::Index dim, const SeedPath& path) {
    NormalStream normals(path.key());
    return gue_sample(dim, normals);
}

}  // namespace wfqd
