#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "wfqd/gue.hpp"
#include "wfqd/qcore.hpp"
#include "wfqd/wf_model.hpp"

namespace wfqd {

/// Two PSD elements summing to the identity.
class TwoElementPovm {
public:
    TwoElementPovm() = default;
    TwoElementPovm(const Matrix& m0, const Matrix& m1, double tol = 1e-10) {
        if (m0.rows() != m0.cols() || m0.rows() != m1.rows() || m0.cols() != m1.cols()) {
            throw DimensionError("TwoElementPovm: elements must be square with equal dimension");
        }
        m0_ = (m0 + m0.adjoint()) * 0.5;
        m1_ = (m1 + m1.adjoint()) * 0.5;
        if (max_abs(m0_ + m1_ - identity(m0.rows())) > tol) {
            throw InvariantError("TwoElementPovm: elements do not sum to identity");
        }
        for (const Matrix* m : {&m0_, &m1_}) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(*m, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -tol) {
                throw InvariantError("TwoElementPovm: element is not positive semidefinite");
            }
        }
    }

    const Matrix& m0() const { return m0_; }
    const Matrix& m1() const { return m1_; }
    const Matrix& element(int k) const { return k == 0 ? m0_ : m1_; }
    Eigen::Index dim() const { return m0_.rows(); }

    /// Swaps the outcome labels.
    TwoElementPovm swapped() const { return TwoElementPovm(m1_, m0_); }

private:
    Matrix m0_, m1_;
};

/// Success probability p0 Tr(m0 rho0) + p1 Tr(m1 rho1).
inline double success_probability(const Matrix& rho0, const Matrix& rho1, double p0,
                                  const TwoElementPovm& povm) {
    return p0 * trace_product(povm.m0(), rho0) + (1.0 - p0) * trace_product(povm.m1(), rho1);
}

/// Optimal two-state discrimination measurement. m0 projects onto the positive
/// eigenspace of p0 rho0 - p1 rho1, m1 onto the negative one; numerically zero
/// eigenvalues go to the element of the larger prior (m0 on a tie).
inline TwoElementPovm helstrom(const Matrix& rho0, const Matrix& rho1, double p0) {
    if (rho0.rows() != rho1.rows() || rho0.cols() != rho1.cols()) {
        throw DimensionError("helstrom: states have different dimensions");
    }
    if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("helstrom: p0 must lie in [0, 1]");
    const double p1 = 1.0 - p0;
    const Matrix o = p0 * rho0 - p1 * rho1;
    const auto eig = eig_hermitian((o + o.adjoint()) * 0.5);
    const double scale = eig.eigenvalues.cwiseAbs().maxCoeff();
    const double zero = 1e-10 * scale;
    const bool zeros_to_m0 = p0 >= p1;

    const Eigen::Index d = rho0.rows();
    Matrix m0 = Matrix::Zero(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const double lambda = eig.eigenvalues(k);
        const bool to_m0 = std::abs(lambda) <= zero ? zeros_to_m0 : lambda > 0.0;
        if (to_m0) m0 += eig.eigenvectors.col(k) * eig.eigenvectors.col(k).adjoint();
    }
    return TwoElementPovm(m0, identity(d) - m0);
}

inline TwoElementPovm helstrom(const DensityOperator& rho0, const DensityOperator& rho1, double p0) {
    return helstrom(rho0.matrix(), rho1.matrix(), p0);
}

namespace detail {

inline Matrix ginibre(Eigen::Index d, NormalStream& normals) {
    Matrix g(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) g(i, j) = cplx(normals.next(), normals.next());
    return g;
}

inline Matrix haar_unitary(Eigen::Index d, NormalStream& normals) {
    Eigen::HouseholderQR<Matrix> qr(ginibre(d, normals));
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR();
    for (Eigen::Index k = 0; k < d; ++k) {
        const cplx rk = r(k, k);
        const double a = std::abs(rk);
        if (a > 0.0) q.col(k) *= rk / a;
    }
    return q;
}

/// Random two-element POVM: alternately a random projective split in a Haar
/// basis, or m0 = S^{-1/2} A S^{-1/2} with A, B Wishart and S = A + B.
inline TwoElementPovm random_povm(Eigen::Index d, NormalStream& normals, bool projective) {
    if (projective) {
        const Matrix u = haar_unitary(d, normals);
        Matrix m0 = Matrix::Zero(d, d);
        for (Eigen::Index k = 0; k < d; ++k) {
            if (normals.uniform() < 0.5) m0 += u.col(k) * u.col(k).adjoint();
        }
        return TwoElementPovm(m0, identity(d) - m0, 1e-9);
    }
    const Matrix ga = ginibre(d, normals), gb = ginibre(d, normals);
    const Matrix a = ga * ga.adjoint(), b = gb * gb.adjoint();
    Eigen::SelfAdjointEigenSolver<Matrix> es(a + b);
    const Matrix inv_sqrt = es.operatorInverseSqrt();
    Matrix m0 = inv_sqrt * a * inv_sqrt;
    m0 = (m0 + m0.adjoint()) * 0.5;
    return TwoElementPovm(m0, identity(d) - m0, 1e-9);
}

}  // namespace detail

/// Random-search cross-check: true iff no sampled two-element POVM beats the
/// candidate's success probability by more than `slack`.
inline bool verify_optimality(const Matrix& rho0, const Matrix& rho1, double p0,
                              const TwoElementPovm& povm, int trials,
                              std::uint64_t seed = 0x0b5e55edULL, double slack = 1e-3) {
    const Eigen::Index d = rho0.rows();
    if (d > 8) throw std::invalid_argument("verify_optimality: dimension above oracle scale (8)");
    if (povm.dim() != d || rho1.rows() != d) throw DimensionError("verify_optimality: dimension mismatch");
    const double candidate = success_probability(rho0, rho1, p0, povm);
    NormalStream normals(SeedPath::mix(seed));
    for (int t = 0; t < trials; ++t) {
        const auto trial = detail::random_povm(d, normals, t % 2 == 0);
        if (success_probability(rho0, rho1, p0, trial) > candidate + slack) return false;
    }
    return true;
}

/// Whole-lab "do F and E agree" measurement built from Helstrom pairs on F
/// and E: outcome 0 = same index, outcome 1 = different index.
inline TwoElementPovm agreement_povm(const TwoElementPovm& pf, const TwoElementPovm& pe,
                                     const LabLayout& layout) {
    if (static_cast<std::size_t>(pf.dim()) != layout.friend_dim() ||
        static_cast<std::size_t>(pe.dim()) != layout.env_dim()) {
        throw DimensionError("agreement_povm: POVM dimensions do not match layout");
    }
    const Eigen::Index d = static_cast<Eigen::Index>(layout.total_dim());
    Matrix m0 = Matrix::Zero(d, d), m1 = Matrix::Zero(d, d);
    for (int alpha = 0; alpha < 2; ++alpha) {
        const Matrix s = DensityOperator::basis(2, alpha).matrix();
        for (int beta = 0; beta < 2; ++beta) {
            for (int gamma = 0; gamma < 2; ++gamma) {
                const Matrix term = tensor({s, pf.element(beta), pe.element(gamma)});
                (beta == gamma ? m0 : m1) += term;
            }
        }
    }
    return TwoElementPovm(m0, m1);
}

struct WfReport {
    double p_f_i = 0.0;
    double p_w_i = 0.0;
    double e0 = 0.0;
    double e1 = 0.0;
    double misid_10 = 0.0;  // Tr(Π_F^1 ρ_F^{(0)})
    double misid_01 = 0.0;  // Tr(Π_F^0 ρ_F^{(1)})
    double p_f_j = 0.0;
    double p_w_j = 0.0;
    double p_b_j = 0.0;
    double epsilon = 0.0;
    double delta = 0.0;
    // Zero-rank flags, indexed [outcome]: Π_F^i or Π_E^i has rank 0.
    std::array<bool, 2> zero_rank_f{};
    std::array<bool, 2> zero_rank_e{};

    bool any_zero_rank() const {
        return zero_rank_f[0] || zero_rank_f[1] || zero_rank_e[0] || zero_rank_e[1];
    }
};

namespace detail {

/// Π / Tr Π, or the maximally mixed state when Π has rank zero.
inline Matrix normalized_projector(const Matrix& proj, bool& zero_rank) {
    const double tr = proj.trace().real();
    zero_rank = tr < 0.5;
    if (zero_rank) return identity(proj.rows()) / static_cast<double>(proj.rows());
    return proj / tr;
}

struct FriendAssignments {
    TwoElementPovm pf, pe;
    std::array<Matrix, 2> f, e;  // normalized Helstrom projectors
    std::array<bool, 2> zero_f{}, zero_e{};
};

inline FriendAssignments friend_assignments(const LabState& state) {
    FriendAssignments a;
    a.pf = helstrom(state.rho_f[0].dense, state.rho_f[1].dense, state.p[0]);
    a.pe = helstrom(state.rho_e[0].dense, state.rho_e[1].dense, state.p[0]);
    for (int i = 0; i < 2; ++i) {
        const auto k = static_cast<std::size_t>(i);
        a.f[k] = normalized_projector(a.pf.element(i), a.zero_f[k]);
        a.e[k] = normalized_projector(a.pe.element(i), a.zero_e[k]);
    }
    return a;
}

}  // namespace detail

/// Observer probabilities for the simple scenario, evaluated sector by sector
/// on the conditional states.
inline WfReport wf_probabilities(const LabState& state) {
    const auto a = detail::friend_assignments(state);
    const auto& p = state.p;
    WfReport r;
    r.zero_rank_f = a.zero_f;
    r.zero_rank_e = a.zero_e;
    r.p_f_i = p[0];

    const Matrix& pf0 = a.pf.m0();
    const Matrix& pf1 = a.pf.m1();
    r.e0 = trace_product(pf0, state.rho_f[0].dense.matrix());
    r.e1 = trace_product(pf1, state.rho_f[1].dense.matrix());
    r.misid_10 = trace_product(pf1, state.rho_f[0].dense.matrix());
    r.misid_01 = trace_product(pf0, state.rho_f[1].dense.matrix());
    r.p_w_i = p[0] * r.e0 + p[1] * r.misid_01;

    const Matrix d_e = identity(a.pe.dim()) / static_cast<double>(a.pe.dim());
    for (int i = 0; i < 2; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (p[k] == 0.0) continue;
        double same_w = 0.0;
        if (state.rho_fe) {
            const Matrix joint = sector_joint(state, i);
            same_w = trace_product(kron(pf0, a.pe.m0()) + kron(pf1, a.pe.m1()), joint);
        } else {
            const Matrix& rf = state.rho_f[k].dense.matrix();
            const Matrix& re = state.rho_e[k].dense.matrix();
            same_w = trace_product(pf0, rf) * trace_product(a.pe.m0(), re) +
                     trace_product(pf1, rf) * trace_product(a.pe.m1(), re);
        }
        const double same_f = trace_product(pf0, a.f[k]) * trace_product(a.pe.m0(), a.e[k]) +
                              trace_product(pf1, a.f[k]) * trace_product(a.pe.m1(), a.e[k]);
        const double same_b = trace_product(pf0, a.f[k]) * trace_product(a.pe.m0(), d_e) +
                              trace_product(pf1, a.f[k]) * trace_product(a.pe.m1(), d_e);
        r.p_w_j += p[k] * same_w;
        r.p_f_j += p[k] * same_f;
        r.p_b_j += p[k] * same_b;
    }
    r.epsilon = std::abs(r.p_w_i - r.p_f_i);
    r.delta = std::abs(r.p_w_j - r.p_f_j);
    return r;
}

/// Same report from full lab-space matrices: ρ_L, ρ_L^F, ρ_L^B and the
/// lab-space measurement operators.
inline WfReport wf_probabilities_dense(const LabState& state) {
    const auto a = detail::friend_assignments(state);
    const auto& layout = state.layout;
    const auto& p = state.p;
    const Matrix rho_l = lab_density(state);
    const Eigen::Index de = static_cast<Eigen::Index>(layout.env_dim());
    const Eigen::Index df = static_cast<Eigen::Index>(layout.friend_dim());

    Matrix rho_f = Matrix::Zero(rho_l.rows(), rho_l.cols());
    Matrix rho_b = rho_f;
    for (int i = 0; i < 2; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const Matrix s = DensityOperator::basis(2, i).matrix();
        rho_f += p[k] * tensor({s, a.f[k], a.e[k]});
        rho_b += p[k] * tensor({s, a.f[k], identity(de) / static_cast<double>(de)});
    }
    const auto m = agreement_povm(a.pf, a.pe, layout);
    const Matrix ask_friend = tensor({identity(2), a.pf.m0(), identity(de)});
    const Matrix sys0 = tensor({DensityOperator::basis(2, 0).matrix(), identity(df), identity(de)});

    WfReport r;
    r.zero_rank_f = a.zero_f;
    r.zero_rank_e = a.zero_e;
    r.p_f_i = trace_product(sys0, rho_f);
    r.p_w_i = trace_product(ask_friend, rho_l);
    r.e0 = trace_product(a.pf.m0(), state.rho_f[0].dense.matrix());
    r.e1 = trace_product(a.pf.m1(), state.rho_f[1].dense.matrix());
    r.misid_10 = trace_product(a.pf.m1(), state.rho_f[0].dense.matrix());
    r.misid_01 = trace_product(a.pf.m0(), state.rho_f[1].dense.matrix());
    r.p_w_j = trace_product(m.m0(), rho_l);
    r.p_f_j = trace_product(m.m0(), rho_f);
    r.p_b_j = trace_product(m.m0(), rho_b);
    r.epsilon = std::abs(r.p_w_i - r.p_f_i);
    r.delta = std::abs(r.p_w_j - r.p_f_j);
    return r;
}

}  // namespace wfqd
