#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfqd/discrimination.hpp"
#include "wfqd/gue.hpp"
#include "wfqd/qcore.hpp"
#include "wfqd/wf_model.hpp"

namespace wfqd {

/// Two labs. Tensor order: system 1, C, E_C, system 2, D, E_D.
struct EwfsConfig {
    int n_c = 2;
    int n_ec = 1;
    int n_d = 1;
    int n_ed = 1;
    double theta = std::numbers::pi / 4.0;
    double degeneracy_tol = 1e-9;
    int max_qubits = kDefaultMaxQubits;
    bool force_dense = false;

    int lab_qubits() const { return n_c + n_ec + n_d + n_ed; }

    void validate() const {
        if (n_c < 1 || n_ec < 1 || n_d < 1 || n_ed < 1) {
            throw std::invalid_argument("EwfsConfig: all qubit counts must be >= 1");
        }
        if (lab_qubits() > max_qubits) {
            throw ResourceLimitError("EwfsConfig: " + std::to_string(lab_qubits()) +
                                     " lab qubits exceed the limit of " +
                                     std::to_string(max_qubits));
        }
    }
    LabLayout lab_c() const { return LabLayout(n_c, n_ec, max_qubits); }
    LabLayout lab_d() const { return LabLayout(n_d, n_ed, max_qubits); }
};

enum class Lab { C, D };

/// Broadcast terms for each lab; C and D take the Friend slot, E_C and E_D the environment slot.
struct EwfsTerms {
    BroadcastTerms c;
    BroadcastTerms d;
};

/// cos θ (|01> - |10>) - sin θ (|00> + |11>), normalized by 1/sqrt(2).
inline Vector source_vector(double theta) {
    Vector psi(4);
    const double s = std::sin(theta) / std::numbers::sqrt2;
    const double c = std::cos(theta) / std::numbers::sqrt2;
    psi << -s, c, -c, -s;
    return psi;
}

inline DensityOperator source_state(double theta) { return DensityOperator::pure(source_vector(theta)); }

inline EwfsTerms sample_ewfs_terms(const EwfsConfig& config, std::uint64_t master_seed,
                                   std::uint64_t sample_index) {
    EwfsTerms terms;
    auto fill = [&](std::vector<Matrix>& out, SubsystemTag tag, int count, std::uint64_t outcome) {
        for (int k = 0; k < count; ++k) {
            const auto path = derive_path(master_seed, sample_index, tag,
                                          static_cast<std::uint64_t>(k), outcome);
            out.push_back(gue_sample(2, path).matrix());
        }
    };
    for (std::uint64_t i = 0; i < 2; ++i) {
        fill(terms.c.f[i], SubsystemTag::C, config.n_c, i);
        fill(terms.c.e[i], SubsystemTag::EC, config.n_ec, i);
        fill(terms.d.f[i], SubsystemTag::D, config.n_d, i);
        fill(terms.d.e[i], SubsystemTag::ED, config.n_ed, i);
    }
    return terms;
}

/// H_C ⊗ 1 + 1 ⊗ H_D, each lab with the single-lab broadcast structure.
inline HermitianOperator build_ewfs_h(const EwfsConfig& config, const EwfsTerms& terms) {
    config.validate();
    WfConfig wc;
    wc.layout = config.lab_c();
    const Matrix hc = build_broadcast_h(wc, terms.c).matrix();
    wc.layout = config.lab_d();
    const Matrix hd = build_broadcast_h(wc, terms.d).matrix();
    return HermitianOperator(kron(hc, identity(hd.rows())) + kron(identity(hc.rows()), hd));
}

inline HermitianOperator build_ewfs_h(const EwfsConfig& config, std::uint64_t master_seed,
                                      std::uint64_t sample_index) {
    return build_ewfs_h(config, sample_ewfs_terms(config, master_seed, sample_index));
}

struct EwfsState {
    std::array<std::array<double, 2>, 2> p_cd{};  // [c][d]
    std::array<ConditionalState, 2> rho_c, rho_ec, rho_d, rho_ed;
    std::optional<DensityOperator> joint;  // dense path only
    Representation representation = Representation::Factored;
    EwfsConfig config{};
    std::size_t degeneracy_merges = 0;

    double p_c(int c) const { return p_cd[static_cast<std::size_t>(c)][0] + p_cd[static_cast<std::size_t>(c)][1]; }
    double p_d(int d) const { return p_cd[0][static_cast<std::size_t>(d)] + p_cd[1][static_cast<std::size_t>(d)]; }
};

inline std::array<std::array<double, 2>, 2> source_probabilities(double theta) {
    const Vector psi = source_vector(theta);
    return {{{std::norm(psi(0)), std::norm(psi(1))}, {std::norm(psi(2)), std::norm(psi(3))}}};
}

/// Lab-local post-measurement state |x><x| ⊗ ρ_X^{(x)} ⊗ ρ_{E_X}^{(x)}.
inline Matrix lab_local_state(const EwfsState& state, Lab lab, int outcome) {
    const auto k = static_cast<std::size_t>(outcome);
    const auto& f = lab == Lab::C ? state.rho_c[k] : state.rho_d[k];
    const auto& e = lab == Lab::C ? state.rho_ec[k] : state.rho_ed[k];
    return tensor({DensityOperator::basis(2, outcome).matrix(), f.dense.matrix(), e.dense.matrix()});
}

/// Σ_cd p(c,d) σ_C^{(c)} ⊗ σ_D^{(d)}, or the stored pinched state on the dense path.
inline Matrix ewfs_density(const EwfsState& state) {
    if (state.joint) return state.joint->matrix();
    Matrix out;
    for (int c = 0; c < 2; ++c) {
        for (int d = 0; d < 2; ++d) {
            const double w = state.p_cd[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
            const Matrix term = w * kron(lab_local_state(state, Lab::C, c), lab_local_state(state, Lab::D, d));
            if (out.size() == 0) out = term;
            else out += term;
        }
    }
    return out;
}

inline EwfsState equilibrate_ewfs_dense(const EwfsConfig& config, const EwfsTerms& terms) {
    config.validate();
    const auto lc = config.lab_c();
    const auto ld = config.lab_d();
    const auto h = build_ewfs_h(config, terms);
    const Eigen::Index dim_c = static_cast<Eigen::Index>(lc.total_dim());
    const Eigen::Index dim_d = static_cast<Eigen::Index>(ld.total_dim());
    const Eigen::Index sec_c = dim_c / 2, sec_d = dim_d / 2;

    const Vector src = source_vector(config.theta);
    Vector psi = Vector::Zero(dim_c * dim_d);
    for (Eigen::Index c = 0; c < 2; ++c)
        for (Eigen::Index d = 0; d < 2; ++d) psi(c * sec_c * dim_d + d * sec_d) = src(2 * c + d);

    auto pinched = pinch_matrix(psi * psi.adjoint(), h.matrix(), config.degeneracy_tol);

    EwfsState state;
    state.config = config;
    state.representation = Representation::Dense;
    state.degeneracy_merges = pinched.merged_clusters;
    state.p_cd = source_probabilities(config.theta);
    state.joint = DensityOperator(pinched.rho);

    const std::vector<std::size_t> split{static_cast<std::size_t>(dim_c), static_cast<std::size_t>(dim_d)};
    auto extract = [&](const Matrix& lab_rho, const LabLayout& layout, double pc, int outcome,
                       ConditionalState& friend_out, ConditionalState& env_out) {
        const Eigen::Index sec = static_cast<Eigen::Index>(layout.friend_dim() * layout.env_dim());
        const Matrix block = lab_rho.block(outcome * sec, outcome * sec, sec, sec) / pc;
        const std::vector<std::size_t> dims{layout.friend_dim(), layout.env_dim()};
        friend_out.dense = DensityOperator(partial_trace(block, dims, {true, false}));
        env_out.dense = DensityOperator(partial_trace(block, dims, {false, true}));
    };
    const Matrix rho_lc = partial_trace(pinched.rho, split, {true, false});
    const Matrix rho_ld = partial_trace(pinched.rho, split, {false, true});
    for (int x = 0; x < 2; ++x) {
        const auto k = static_cast<std::size_t>(x);
        extract(rho_lc, lc, state.p_c(x), x, state.rho_c[k], state.rho_ec[k]);
        extract(rho_ld, ld, state.p_d(x), x, state.rho_d[k], state.rho_ed[k]);
    }
    return state;
}

inline constexpr int kDenseFallbackMaxQubits = 10;

/// Pinched two-lab state. Sector weights are the source's computational
/// probabilities; conditional states are per-qubit pinches. Near-degenerate
/// joint spectra fall back to the dense path when it fits in memory.
inline EwfsState equilibrate_ewfs(const EwfsConfig& config, const EwfsTerms& terms) {
    config.validate();
    if (config.force_dense) return equilibrate_ewfs_dense(config, terms);

    auto lab_spectra = [](const BroadcastTerms& t) {
        std::array<std::vector<double>, 2> out;
        for (std::size_t i = 0; i < 2; ++i) {
            std::vector<Matrix> all = t.f[i];
            all.insert(all.end(), t.e[i].begin(), t.e[i].end());
            out[i] = local_sum_spectrum(all);
        }
        return out;
    };
    const auto sc = lab_spectra(terms.c);
    const auto sd = lab_spectra(terms.d);
    std::vector<double> joint;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t d = 0; d < 2; ++d)
            for (double a : sc[c])
                for (double b : sd[d]) joint.push_back(a + b);
    const auto [lo, hi] = std::minmax_element(joint.begin(), joint.end());
    const std::size_t merged = count_merged(joint, *hi - *lo, config.degeneracy_tol);
    if (merged > 0 && config.lab_qubits() + 2 <= kDenseFallbackMaxQubits) {
        auto state = equilibrate_ewfs_dense(config, terms);
        state.degeneracy_merges = std::max(state.degeneracy_merges, merged);
        return state;
    }

    EwfsState state;
    state.config = config;
    state.representation = Representation::Factored;
    state.degeneracy_merges = merged;
    state.p_cd = source_probabilities(config.theta);
    auto pinch_all = [&](const std::vector<Matrix>& ts) {
        std::vector<Matrix> q;
        for (const auto& t : ts) q.push_back(pinch_ground_qubit(t, config.degeneracy_tol));
        return conditional_from_qubits(std::move(q));
    };
    for (std::size_t x = 0; x < 2; ++x) {
        state.rho_c[x] = pinch_all(terms.c.f[x]);
        state.rho_ec[x] = pinch_all(terms.c.e[x]);
        state.rho_d[x] = pinch_all(terms.d.f[x]);
        state.rho_ed[x] = pinch_all(terms.d.e[x]);
    }
    return state;
}

inline EwfsState equilibrate_ewfs(const EwfsConfig& config, std::uint64_t master_seed,
                                  std::uint64_t sample_index) {
    return equilibrate_ewfs(config, sample_ewfs_terms(config, master_seed, sample_index));
}

inline const double kLfThreshold = (std::numbers::sqrt2 - 1.0) / 2.0;

struct LfReport {
    double varepsilon = 0.0;
    double bound = 2.0;
    bool violable = true;
};

/// Modified CHSH bound 2 + 4ε; violable by quantum theory while below 2√2.
inline LfReport lf_report(double varepsilon) {
    return {varepsilon, 2.0 + 4.0 * varepsilon, varepsilon < kLfThreshold};
}

/// Readout non-ideality of the optimal projectors on the given lab's Friend.
inline LfReport lf_epsilon(const EwfsState& state, Lab lab = Lab::C) {
    const auto& r = lab == Lab::C ? state.rho_c : state.rho_d;
    const double p0 = lab == Lab::C ? state.p_c(0) : state.p_d(0);
    const double p1 = 1.0 - p0;
    const auto povm = helstrom(r[0].dense, r[1].dense, p0);
    const double eps = 1.0 - p0 * trace_product(povm.m0(), r[0].dense.matrix()) -
                       p1 * trace_product(povm.m1(), r[1].dense.matrix());
    return lf_report(std::clamp(eps, 0.0, 1.0));
}

namespace detail {

inline void check_dichotomic(const Matrix& a, const char* name) {
    if (a.rows() != a.cols()) throw DimensionError(std::string("chsh_value: ") + name + " not square");
    if (max_abs(a - a.adjoint()) > 1e-10) throw InvariantError(std::string("chsh_value: ") + name + " not Hermitian");
    const RealVector ev =
        Eigen::SelfAdjointEigenSolver<Matrix>((a + a.adjoint()) * 0.5, Eigen::EigenvaluesOnly).eigenvalues();
    if (ev.minCoeff() < -1.0 - 1e-10 || ev.maxCoeff() > 1.0 + 1e-10) {
        throw InvariantError(std::string("chsh_value: ") + name + " spectrum outside [-1, 1]");
    }
}

}  // namespace detail

/// <A0B0> + <A0B1> - <A1B0> + <A1B1> on a dense bipartite state.
inline double chsh_value(const Matrix& rho, const Matrix& a0, const Matrix& a1, const Matrix& b0,
                         const Matrix& b1) {
    detail::check_dichotomic(a0, "a0");
    detail::check_dichotomic(a1, "a1");
    detail::check_dichotomic(b0, "b0");
    detail::check_dichotomic(b1, "b1");
    if (a0.rows() != a1.rows() || b0.rows() != b1.rows() || rho.rows() != a0.rows() * b0.rows()) {
        throw DimensionError("chsh_value: observable dimensions do not match the state");
    }
    auto corr = [&](const Matrix& a, const Matrix& b) { return trace_product(kron(a, b), rho); };
    return corr(a0, b0) + corr(a0, b1) - corr(a1, b0) + corr(a1, b1);
}

/// CHSH combination with observables on lab C (a0, a1) and lab D (b0, b1).
inline double chsh_value(const EwfsState& state, const Matrix& a0, const Matrix& a1,
                         const Matrix& b0, const Matrix& b1) {
    if (state.joint) return chsh_value(state.joint->matrix(), a0, a1, b0, b1);
    detail::check_dichotomic(a0, "a0");
    detail::check_dichotomic(a1, "a1");
    detail::check_dichotomic(b0, "b0");
    detail::check_dichotomic(b1, "b1");
    std::array<Matrix, 2> sc{lab_local_state(state, Lab::C, 0), lab_local_state(state, Lab::C, 1)};
    std::array<Matrix, 2> sd{lab_local_state(state, Lab::D, 0), lab_local_state(state, Lab::D, 1)};
    if (a0.rows() != sc[0].rows() || a1.rows() != sc[0].rows() || b0.rows() != sd[0].rows() ||
        b1.rows() != sd[0].rows()) {
        throw DimensionError("chsh_value: observable dimensions do not match the labs");
    }
    auto corr = [&](const Matrix& a, const Matrix& b) {
        double acc = 0.0;
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t d = 0; d < 2; ++d)
                acc += state.p_cd[c][d] * trace_product(a, sc[c]) * trace_product(b, sd[d]);
        return acc;
    };
    return corr(a0, b0) + corr(a0, b1) - corr(a1, b0) + corr(a1, b1);
}

}  // namespace wfqd
