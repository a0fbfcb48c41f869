#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wfqd/gue.hpp"
#include "wfqd/qcore.hpp"

namespace wfqd {

enum class Representation { Factored, Dense };

struct WfConfig {
    LabLayout layout{};
    double p0 = 0.5;
    double scale_f = 1.0;
    double scale_e = 1.0;
    double degeneracy_tol = 1e-9;
    bool force_dense = false;

    void validate() const {
        if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("WfConfig: p0 must lie in [0, 1]");
        if (!(degeneracy_tol >= 0.0)) throw std::invalid_argument("WfConfig: degeneracy_tol < 0");
    }
    std::array<double, 2> priors() const { return {p0, 1.0 - p0}; }
};

/// Conditional single-qubit Hamiltonians H^{(i)}_{F_k}, H^{(i)}_{E_k}, indexed [outcome][site].
struct BroadcastTerms {
    std::array<std::vector<Matrix>, 2> f;
    std::array<std::vector<Matrix>, 2> e;
};

inline BroadcastTerms sample_broadcast_terms(const WfConfig& config, std::uint64_t master_seed,
                                             std::uint64_t sample_index) {
    BroadcastTerms terms;
    for (std::uint64_t i = 0; i < 2; ++i) {
        for (int k = 0; k < config.layout.n_f; ++k) {
            const auto path = derive_path(master_seed, sample_index, SubsystemTag::F,
                                          static_cast<std::uint64_t>(k), i);
            terms.f[i].push_back(config.scale_f * gue_sample(2, path).matrix());
        }
        for (int k = 0; k < config.layout.n_e; ++k) {
            const auto path = derive_path(master_seed, sample_index, SubsystemTag::E,
                                          static_cast<std::uint64_t>(k), i);
            terms.e[i].push_back(config.scale_e * gue_sample(2, path).matrix());
        }
    }
    return terms;
}

/// Sum of single-qubit terms, each embedded on its own qubit of an n-qubit register.
inline Matrix sum_of_local_terms(std::span<const Matrix> terms) {
    const int n = static_cast<int>(terms.size());
    const Eigen::Index dim = Eigen::Index{1} << n;
    Matrix h = Matrix::Zero(dim, dim);
    for (int k = 0; k < n; ++k) h += embed_qubit(terms[static_cast<std::size_t>(k)], k, n);
    return h;
}

/// H^{(i)} on the F ⊗ E register.
inline Matrix sector_hamiltonian(const BroadcastTerms& terms, int outcome) {
    const auto i = static_cast<std::size_t>(outcome);
    std::vector<Matrix> all = terms.f[i];
    all.insert(all.end(), terms.e[i].begin(), terms.e[i].end());
    return sum_of_local_terms(all);
}

inline HermitianOperator build_broadcast_h(const WfConfig& config, const BroadcastTerms& terms) {
    const auto& layout = config.layout;
    for (std::size_t i = 0; i < 2; ++i) {
        if (terms.f[i].size() != static_cast<std::size_t>(layout.n_f) ||
            terms.e[i].size() != static_cast<std::size_t>(layout.n_e)) {
            throw DimensionError("build_broadcast_h: term count does not match layout");
        }
    }
    Matrix h = Matrix::Zero(static_cast<Eigen::Index>(layout.total_dim()),
                            static_cast<Eigen::Index>(layout.total_dim()));
    for (int i = 0; i < 2; ++i) {
        h += kron(DensityOperator::basis(2, i).matrix(), sector_hamiltonian(terms, i));
    }
    return HermitianOperator(h);
}

inline HermitianOperator build_broadcast_h(const WfConfig& config, std::uint64_t master_seed,
                                           std::uint64_t sample_index) {
    return build_broadcast_h(config, sample_broadcast_terms(config, master_seed, sample_index));
}

/// A conditional macrofraction state, optionally with its per-qubit factors.
struct ConditionalState {
    std::vector<Matrix> qubits;  // empty unless the state is known to be a product
    DensityOperator dense;

    bool factored() const { return !qubits.empty(); }
};

inline ConditionalState conditional_from_qubits(std::vector<Matrix> qubits) {
    ConditionalState out;
    out.dense = DensityOperator(tensor(std::span<const Matrix>(qubits)));
    out.qubits = std::move(qubits);
    return out;
}

struct LabState {
    std::array<double, 2> p{};
    std::array<ConditionalState, 2> rho_f;
    std::array<ConditionalState, 2> rho_e;
    // Joint F⊗E conditional states; present on the dense path.
    std::optional<std::array<DensityOperator, 2>> rho_fe;
    // Full pinched lab state; present on the dense path.
    std::optional<DensityOperator> lab;
    Representation representation = Representation::Factored;
    LabLayout layout{};
    std::size_t degeneracy_merges = 0;
};

/// Pinch of |0><0| under a single-qubit Hamiltonian.
inline Matrix pinch_ground_qubit(const Matrix& h, double degeneracy_tol) {
    return pinch_matrix(DensityOperator::basis(2, 0).matrix(), h, degeneracy_tol).rho;
}

/// All eigenvalues of a sum of local single-qubit terms, from the local spectra.
inline std::vector<double> local_sum_spectrum(std::span<const Matrix> terms) {
    std::vector<double> spectrum{0.0};
    for (const auto& t : terms) {
        const RealVector ev = eig_hermitian(t).eigenvalues;
        std::vector<double> next;
        next.reserve(spectrum.size() * 2);
        for (double s : spectrum) {
            next.push_back(s + ev(0));
            next.push_back(s + ev(1));
        }
        spectrum = std::move(next);
    }
    return spectrum;
}

/// Number of clusters with more than one member, grouping values closer
/// than tol * range.
inline std::size_t count_merged(std::vector<double> values, double range, double tol) {
    std::sort(values.begin(), values.end());
    std::size_t merged = 0;
    bool in_cluster = false;
    for (std::size_t k = 1; k < values.size(); ++k) {
        const bool close = values[k] - values[k - 1] <= tol * range;
        if (close && !in_cluster) ++merged;
        in_cluster = close;
    }
    return merged;
}

inline LabState equilibrate_dense(const WfConfig& config, const BroadcastTerms& terms) {
    config.validate();
    const auto& layout = config.layout;
    const auto h = build_broadcast_h(config, terms);
    const Eigen::Index sector = static_cast<Eigen::Index>(layout.friend_dim() * layout.env_dim());
    const Matrix ground = DensityOperator::basis(sector, 0).matrix();

    LabState state;
    state.layout = layout;
    state.p = config.priors();
    state.representation = Representation::Dense;
    Matrix lab = Matrix::Zero(h.dim(), h.dim());
    std::array<DensityOperator, 2> joint;
    const std::vector<std::size_t> dims{layout.friend_dim(), layout.env_dim()};
    for (int i = 0; i < 2; ++i) {
        const Matrix init = kron(DensityOperator::basis(2, i).matrix(), ground);
        auto pinched = pinch_matrix(init, h.matrix(), config.degeneracy_tol);
        state.degeneracy_merges = std::max(state.degeneracy_merges, pinched.merged_clusters);
        lab += state.p[static_cast<std::size_t>(i)] * pinched.rho;
        const Matrix block = pinched.rho.block(i * sector, i * sector, sector, sector);
        joint[static_cast<std::size_t>(i)] = DensityOperator(block);
        state.rho_f[static_cast<std::size_t>(i)].dense =
            DensityOperator(partial_trace(block, dims, {true, false}));
        state.rho_e[static_cast<std::size_t>(i)].dense =
            DensityOperator(partial_trace(block, dims, {false, true}));
    }
    state.rho_fe = joint;
    state.lab = DensityOperator(lab);
    return state;
}

/// Pinched lab state. Sector Hamiltonians are sums of single-qubit terms, so
/// with a non-degenerate sector spectrum each qubit dephases independently.
/// Falls back to the dense path when a sector spectrum has near-degeneracies.
inline LabState equilibrate(const WfConfig& config, const BroadcastTerms& terms) {
    config.validate();
    if (config.force_dense) return equilibrate_dense(config, terms);

    std::array<std::vector<double>, 2> spectra;
    for (std::size_t i = 0; i < 2; ++i) {
        std::vector<Matrix> all = terms.f[i];
        all.insert(all.end(), terms.e[i].begin(), terms.e[i].end());
        spectra[i] = local_sum_spectrum(all);
    }
    const auto [lo0, hi0] = std::minmax_element(spectra[0].begin(), spectra[0].end());
    const auto [lo1, hi1] = std::minmax_element(spectra[1].begin(), spectra[1].end());
    const double range = std::max(*hi0, *hi1) - std::min(*lo0, *lo1);
    const std::size_t merged = count_merged(spectra[0], range, config.degeneracy_tol) +
                               count_merged(spectra[1], range, config.degeneracy_tol);
    if (merged > 0) {
        auto state = equilibrate_dense(config, terms);
        state.degeneracy_merges = std::max<std::size_t>(state.degeneracy_merges, merged);
        return state;
    }

    LabState state;
    state.layout = config.layout;
    state.p = config.priors();
    state.representation = Representation::Factored;
    for (std::size_t i = 0; i < 2; ++i) {
        std::vector<Matrix> fq, eq;
        for (const auto& t : terms.f[i]) fq.push_back(pinch_ground_qubit(t, config.degeneracy_tol));
        for (const auto& t : terms.e[i]) eq.push_back(pinch_ground_qubit(t, config.degeneracy_tol));
        state.rho_f[i] = conditional_from_qubits(std::move(fq));
        state.rho_e[i] = conditional_from_qubits(std::move(eq));
    }
    return state;
}

inline LabState equilibrate(const WfConfig& config, std::uint64_t master_seed,
                            std::uint64_t sample_index) {
    return equilibrate(config, sample_broadcast_terms(config, master_seed, sample_index));
}

/// Dense ρ_L. Uses the stored pinched state when present, otherwise
/// Σ_i p_i |i><i| ⊗ ρ_F^{(i)} ⊗ ρ_E^{(i)}.
inline Matrix lab_density(const LabState& state) {
    if (state.lab) return state.lab->matrix();
    const Eigen::Index d = static_cast<Eigen::Index>(state.layout.total_dim());
    Matrix out = Matrix::Zero(d, d);
    for (int i = 0; i < 2; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (state.p[k] == 0.0) continue;
        out += state.p[k] * tensor({DensityOperator::basis(2, i).matrix(), state.rho_f[k].dense.matrix(),
                                    state.rho_e[k].dense.matrix()});
    }
    return out;
}

/// Joint F⊗E state of sector i.
inline Matrix sector_joint(const LabState& state, int outcome) {
    const auto k = static_cast<std::size_t>(outcome);
    if (state.rho_fe) return (*state.rho_fe)[k].matrix();
    return kron(state.rho_f[k].dense.matrix(), state.rho_e[k].dense.matrix());
}

inline double overlap(const ConditionalState& a, const ConditionalState& b) {
    if (a.factored() && b.factored() && a.qubits.size() == b.qubits.size()) {
        double prod = 1.0;
        for (std::size_t k = 0; k < a.qubits.size(); ++k) {
            prod *= trace_product(a.qubits[k], b.qubits[k]);
        }
        return prod;
    }
    return trace_product(a.dense.matrix(), b.dense.matrix());
}

struct OverlapMetrics {
    double friend_overlap = 0.0;
    double env_overlap = 0.0;
};

inline OverlapMetrics overlap_metrics(const LabState& state) {
    return {overlap(state.rho_f[0], state.rho_f[1]), overlap(state.rho_e[0], state.rho_e[1])};
}

}  // namespace wfqd
