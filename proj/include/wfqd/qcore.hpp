#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wfqd {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvariantError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a requested layout exceeds the configured qubit budget.
class ResourceLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kDefaultMaxQubits = 12;

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Dimension bookkeeping for a single lab: pointer system, Friend and environment.
///
/// Tensor order is S ⊗ F_1 ⊗ ... ⊗ F_nf ⊗ E_1 ⊗ ... ⊗ E_ne with the first
/// factor most significant in the basis index.
struct LabLayout {
    int n_f = 1;
    int n_e = 1;
    int system_dim = 2;

    enum class Region { F, E };

    LabLayout() = default;
    LabLayout(int nf, int ne, int max_qubits = kDefaultMaxQubits) : n_f(nf), n_e(ne) {
        if (nf < 1 || ne < 1) {
            throw std::invalid_argument("LabLayout: n_f and n_e must be >= 1");
        }
        if (nf + ne > max_qubits) {
            throw ResourceLimitError("LabLayout: n_f + n_e = " + std::to_string(nf + ne) +
                                     " exceeds the limit of " + std::to_string(max_qubits) +
                                     " qubits");
        }
    }

    std::size_t friend_dim() const { return std::size_t{1} << n_f; }
    std::size_t env_dim() const { return std::size_t{1} << n_e; }
    std::size_t total_dim() const {
        return static_cast<std::size_t>(system_dim) * friend_dim() * env_dim();
    }
    int region_size(Region r) const { return r == Region::F ? n_f : n_e; }

    /// Factor dimensions in tensor order (system, then one entry per qubit).
    std::vector<std::size_t> factor_dims() const {
        std::vector<std::size_t> dims{static_cast<std::size_t>(system_dim)};
        dims.insert(dims.end(), static_cast<std::size_t>(n_f + n_e), 2);
        return dims;
    }
};

/// Dense Hermitian matrix; symmetrized on construction.
class HermitianOperator {
public:
    HermitianOperator() = default;
    explicit HermitianOperator(const Matrix& m) {
        if (m.rows() != m.cols() || m.rows() == 0) {
            throw DimensionError("HermitianOperator: matrix must be square and non-empty");
        }
        m_ = (m + m.adjoint()) * 0.5;
    }

    const Matrix& matrix() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

private:
    Matrix m_;
};

struct DensityTolerances {
    double trace = 1e-10;
    double min_eigenvalue = -1e-10;
    double hermiticity = 1e-12;
};

/// Unit-trace positive semidefinite Hermitian matrix.
class DensityOperator {
public:
    DensityOperator() = default;
    explicit DensityOperator(const Matrix& m, DensityTolerances tol = {}) {
        if (m.rows() != m.cols() || m.rows() == 0) {
            throw DimensionError("DensityOperator: matrix must be square and non-empty");
        }
        const double herm = max_abs(m - m.adjoint());
        if (herm > tol.hermiticity * std::max(1.0, max_abs(m))) {
            throw InvariantError("DensityOperator: not Hermitian (deviation " +
                                 std::to_string(herm) + ")");
        }
        m_ = (m + m.adjoint()) * 0.5;
        const double tr = m_.trace().real();
        if (std::abs(tr - 1.0) > tol.trace) {
            throw InvariantError("DensityOperator: trace " + std::to_string(tr) + " != 1");
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < tol.min_eigenvalue) {
            throw InvariantError("DensityOperator: negative eigenvalue " +
                                 std::to_string(es.eigenvalues().minCoeff()));
        }
    }

    static DensityOperator pure(const Vector& psi) {
        const double n = psi.norm();
        if (n == 0.0) throw InvariantError("DensityOperator::pure: zero vector");
        const Vector v = psi / n;
        return DensityOperator(v * v.adjoint());
    }

    static DensityOperator maximally_mixed(Eigen::Index dim) {
        return DensityOperator(Matrix::Identity(dim, dim) / static_cast<double>(dim));
    }

    /// |index><index| in the computational basis.
    static DensityOperator basis(Eigen::Index dim, Eigen::Index index) {
        Matrix m = Matrix::Zero(dim, dim);
        m(index, index) = 1.0;
        return DensityOperator(m);
    }

    const Matrix& matrix() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

private:
    Matrix m_;
};

struct EigenDecomposition {
    RealVector eigenvalues;  // ascending
    Matrix eigenvectors;     // columns
};

// Kronecker product, first operand most significant.
inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

inline Matrix tensor(std::span<const Matrix> ops) {
    if (ops.empty()) throw std::invalid_argument("tensor: empty operand list");
    for (const auto& op : ops) {
        if (op.rows() != op.cols()) throw DimensionError("tensor: operands must be square");
    }
    Matrix out = ops.front();
    for (std::size_t k = 1; k < ops.size(); ++k) out = kron(out, ops[k]);
    return out;
}

inline Matrix tensor(std::initializer_list<Matrix> ops) {
    return tensor(std::span<const Matrix>(ops.begin(), ops.size()));
}

inline Matrix identity(Eigen::Index dim) { return Matrix::Identity(dim, dim); }

/// Places a single-qubit operator on one Friend or environment qubit of the lab.
inline Matrix embed_local(const Matrix& op, int site, const LabLayout& layout,
                          LabLayout::Region region) {
    if (op.rows() != 2 || op.cols() != 2) {
        throw DimensionError("embed_local: operator must be 2x2");
    }
    if (site < 0 || site >= layout.region_size(region)) {
        throw std::out_of_range("embed_local: site " + std::to_string(site) + " out of range");
    }
    const int qubit = (region == LabLayout::Region::F ? 0 : layout.n_f) + site;
    const int n = layout.n_f + layout.n_e;
    const Eigen::Index before = Eigen::Index{1} << qubit;
    const Eigen::Index after = Eigen::Index{1} << (n - qubit - 1);
    return tensor({identity(layout.system_dim * before), op, identity(after)});
}

/// Embeds a single-qubit operator at position `qubit` of an n-qubit register.
inline Matrix embed_qubit(const Matrix& op, int qubit, int n_qubits) {
    if (op.rows() != 2 || op.cols() != 2) {
        throw DimensionError("embed_qubit: operator must be 2x2");
    }
    if (qubit < 0 || qubit >= n_qubits) throw std::out_of_range("embed_qubit: qubit index");
    return tensor({identity(Eigen::Index{1} << qubit), op,
                   identity(Eigen::Index{1} << (n_qubits - qubit - 1))});
}

/// Partial trace over a product of factors with dimensions `dims`; factors with
/// keep[k] == true survive, in their original order.
inline Matrix partial_trace(const Matrix& rho, std::span<const std::size_t> dims,
                            const std::vector<bool>& keep) {
    if (dims.size() != keep.size()) throw DimensionError("partial_trace: keep mask size");
    std::size_t total = 1;
    for (auto d : dims) total *= d;
    if (rho.rows() != rho.cols() || static_cast<std::size_t>(rho.rows()) != total) {
        throw DimensionError("partial_trace: matrix dimension inconsistent with factors");
    }
    const std::size_t nf = dims.size();
    // strides of each factor in the full index
    std::vector<std::size_t> stride(nf);
    std::size_t s = 1;
    for (std::size_t k = nf; k-- > 0;) {
        stride[k] = s;
        s *= dims[k];
    }
    std::size_t kept_dim = 1, traced_dim = 1;
    for (std::size_t k = 0; k < nf; ++k) (keep[k] ? kept_dim : traced_dim) *= dims[k];

    // full index for each kept / traced multi-index
    auto offsets = [&](bool kept_side, std::size_t count) {
        std::vector<std::size_t> out(count);
        for (std::size_t idx = 0; idx < count; ++idx) {
            std::size_t rem = idx, full = 0;
            for (std::size_t k = nf; k-- > 0;) {
                if (keep[k] != kept_side) continue;
                full += (rem % dims[k]) * stride[k];
                rem /= dims[k];
            }
            out[idx] = full;
        }
        return out;
    };
    const auto kept_off = offsets(true, kept_dim);
    const auto traced_off = offsets(false, traced_dim);

    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(kept_dim),
                              static_cast<Eigen::Index>(kept_dim));
    for (std::size_t a = 0; a < kept_dim; ++a) {
        for (std::size_t b = 0; b < kept_dim; ++b) {
            cplx acc = 0.0;
            for (std::size_t t : traced_off) {
                acc += rho(static_cast<Eigen::Index>(kept_off[a] + t),
                           static_cast<Eigen::Index>(kept_off[b] + t));
            }
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = acc;
        }
    }
    return out;
}

enum class Subsystem { S, F, E };

inline DensityOperator partial_trace(const DensityOperator& rho, const LabLayout& layout,
                                     std::initializer_list<Subsystem> keep) {
    const std::vector<std::size_t> dims{static_cast<std::size_t>(layout.system_dim),
                                        layout.friend_dim(), layout.env_dim()};
    std::vector<bool> mask(3, false);
    for (auto s : keep) mask[static_cast<std::size_t>(s)] = true;
    return DensityOperator(partial_trace(rho.matrix(), dims, mask));
}

inline EigenDecomposition eig_hermitian(const Matrix& m, double hermiticity_tol = 1e-12) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw DimensionError("eig_hermitian: matrix must be square and non-empty");
    }
    if (max_abs(m - m.adjoint()) > hermiticity_tol * std::max(1.0, max_abs(m))) {
        throw InvariantError("eig_hermitian: matrix is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es((m + m.adjoint()) * 0.5);
    if (es.info() != Eigen::Success) throw std::runtime_error("eig_hermitian: solver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

inline EigenDecomposition eig_hermitian(const HermitianOperator& h) {
    return eig_hermitian(h.matrix());
}

/// Groups ascending eigenvalues into clusters separated by gaps of at least
/// tol * spectral range. Returns [begin, end) index pairs.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> eigenvalue_clusters(
    const RealVector& ascending, double tol) {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
    const Eigen::Index n = ascending.size();
    if (n == 0) return out;
    const double range = ascending(n - 1) - ascending(0);
    const double gap = tol * range;
    Eigen::Index start = 0;
    for (Eigen::Index k = 1; k < n; ++k) {
        if (ascending(k) - ascending(k - 1) > gap) {
            out.emplace_back(start, k);
            start = k;
        }
    }
    out.emplace_back(start, n);
    return out;
}

struct PinchResult {
    Matrix rho;
    std::size_t merged_clusters = 0;  // clusters with more than one eigenvalue
};

inline PinchResult pinch_matrix(const Matrix& rho, const Matrix& h, double degeneracy_tol = 1e-9) {
    if (rho.rows() != h.rows() || rho.cols() != h.cols()) {
        throw DimensionError("pinch: dimension mismatch");
    }
    const auto eig = eig_hermitian(h);
    const Matrix& v = eig.eigenvectors;
    const Matrix rho_eig = v.adjoint() * rho * v;
    Matrix dephased = Matrix::Zero(rho.rows(), rho.cols());
    PinchResult out;
    for (auto [b, e] : eigenvalue_clusters(eig.eigenvalues, degeneracy_tol)) {
        const Eigen::Index len = e - b;
        if (len > 1) ++out.merged_clusters;
        dephased.block(b, b, len, len) = rho_eig.block(b, b, len, len);
    }
    out.rho = v * dephased * v.adjoint();
    out.rho = (out.rho + out.rho.adjoint()) * 0.5;
    return out;
}

/// Infinite-time average of rho under h: sum_n P_n rho P_n over eigenspaces of h.
inline DensityOperator pinch(const DensityOperator& rho, const HermitianOperator& h,
                             double degeneracy_tol = 1e-9) {
    return DensityOperator(pinch_matrix(rho.matrix(), h.matrix(), degeneracy_tol).rho);
}

/// Tr(a b) for Hermitian a, b.
inline double trace_product(const Matrix& a, const Matrix& b) {
    return (a.array() * b.transpose().array()).sum().real();
}

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

namespace pauli {
inline Matrix x() { Matrix m(2, 2); m << 0, 1, 1, 0; return m; }
inline Matrix y() { Matrix m(2, 2); m << 0, cplx(0, -1), cplx(0, 1), 0; return m; }
inline Matrix z() { Matrix m(2, 2); m << 1, 0, 0, -1; return m; }
}  // namespace pauli

}  // namespace wfqd
