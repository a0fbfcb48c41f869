#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_util.hpp"
#include "wfqd/discrimination.hpp"
#include "wfqd/ewfs_model.hpp"

using namespace wfqd;

namespace {

EwfsConfig small_config(int nc = 2, int nec = 1) {
    EwfsConfig c;
    c.n_c = nc;
    c.n_ec = nec;
    return c;
}

Matrix spin(double angle) { return std::cos(angle) * pauli::z() + std::sin(angle) * pauli::x(); }

// cos(a) Z + sin(a) (cos(b) X + sin(b) Y) on the system qubit of a lab, identity elsewhere.
Matrix random_system_observable(std::mt19937_64& rng, Eigen::Index lab_dim) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    const double a = u(rng), b = u(rng);
    const Matrix s = std::cos(a) * pauli::z() + std::sin(a) * (std::cos(b) * pauli::x() + std::sin(b) * pauli::y());
    return kron(s, identity(lab_dim / 2));
}

// U diag(±1) U† with a random unitary on the whole lab.
Matrix random_dichotomic(std::mt19937_64& rng, Eigen::Index d) {
    Eigen::HouseholderQR<Matrix> qr(wfqd::testing::random_matrix(d, rng));
    const Matrix u = qr.householderQ();
    std::bernoulli_distribution coin(0.5);
    Vector signs(d);
    for (Eigen::Index k = 0; k < d; ++k) signs(k) = coin(rng) ? 1.0 : -1.0;
    return u * signs.asDiagonal() * u.adjoint();
}

}  // namespace

TEST(Source, NormalizedForAnyAngle) {
    for (double t : {0.0, 0.3, std::numbers::pi / 4.0, 1.1, 2.5, -0.7}) {
        EXPECT_NEAR(source_vector(t).norm(), 1.0, 1e-15);
        const auto p = source_probabilities(t);
        EXPECT_NEAR(p[0][0] + p[0][1], 0.5, 1e-15);
        EXPECT_NEAR(p[1][0] + p[1][1], 0.5, 1e-15);
        EXPECT_NEAR(p[0][0], std::pow(std::sin(t), 2) / 2.0, 1e-15);
        EXPECT_NEAR(p[1][1], std::pow(std::sin(t), 2) / 2.0, 1e-15);
        EXPECT_NEAR(p[0][1], std::pow(std::cos(t), 2) / 2.0, 1e-15);
        EXPECT_NEAR(p[1][0], std::pow(std::cos(t), 2) / 2.0, 1e-15);
    }
}

TEST(Source, ZeroAngleIsSinglet) {
    Vector singlet = Vector::Zero(4);
    singlet(1) = 1.0 / std::sqrt(2.0);
    singlet(2) = -1.0 / std::sqrt(2.0);
    EXPECT_LT(max_abs(source_state(0.0).matrix() - singlet * singlet.adjoint()), 1e-15);
}

TEST(EwfsH, LabsCommuteAndRespectSectors) {
    const auto c = small_config();
    const auto terms = sample_ewfs_terms(c, 42, 0);
    const Matrix h = build_ewfs_h(c, terms).matrix();
    const Eigen::Index dc = 16, dd = 8;
    WfConfig wc;
    wc.layout = c.lab_c();
    const Matrix hc = kron(build_broadcast_h(wc, terms.c).matrix(), identity(dd));
    wc.layout = c.lab_d();
    const Matrix hd = kron(identity(dc), build_broadcast_h(wc, terms.d).matrix());
    EXPECT_LT(max_abs(h - hc - hd), 1e-14);
    EXPECT_EQ(max_abs(commutator(hc, hd)), 0.0);
    for (int x = 0; x < 2; ++x) {
        const Matrix pc = tensor({DensityOperator::basis(2, x).matrix(), identity(dc / 2), identity(dd)});
        const Matrix pd = tensor({identity(dc), DensityOperator::basis(2, x).matrix(), identity(dd / 2)});
        EXPECT_EQ(max_abs(commutator(h, pc)), 0.0);
        EXPECT_EQ(max_abs(commutator(h, pd)), 0.0);
    }
}

TEST(EwfsH, SectorSpectraAreSumsOfLocalSpectra) {
    const auto c = small_config();
    const auto terms = sample_ewfs_terms(c, 42, 3);
    const Matrix h = build_ewfs_h(c, terms).matrix();
    std::vector<double> want;
    for (std::size_t x = 0; x < 2; ++x) {
        for (std::size_t y = 0; y < 2; ++y) {
            std::vector<double> acc{0.0};
            std::vector<Matrix> all = terms.c.f[x];
            all.insert(all.end(), terms.c.e[x].begin(), terms.c.e[x].end());
            all.insert(all.end(), terms.d.f[y].begin(), terms.d.f[y].end());
            all.insert(all.end(), terms.d.e[y].begin(), terms.d.e[y].end());
            for (const auto& t : all) {
                // 2x2 eigenvalues in closed form
                const double m = 0.5 * (t(0, 0).real() + t(1, 1).real());
                const double r = std::sqrt(0.25 * std::pow(t(0, 0).real() - t(1, 1).real(), 2) + std::norm(t(0, 1)));
                std::vector<double> next;
                for (double a : acc) {
                    next.push_back(a + m - r);
                    next.push_back(a + m + r);
                }
                acc = next;
            }
            want.insert(want.end(), acc.begin(), acc.end());
        }
    }
    std::sort(want.begin(), want.end());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    ASSERT_EQ(static_cast<std::size_t>(es.eigenvalues().size()), want.size());
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(es.eigenvalues()(static_cast<Eigen::Index>(k)), want[k], 1e-9);
}

TEST(EwfsConfig, Validation) {
    EwfsConfig c;
    c.n_c = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.n_c = 9;
    c.n_ec = 2;
    EXPECT_THROW(c.validate(), ResourceLimitError);
}

TEST(EquilibrateEwfs, SectorWeightsMatchSource) {
    for (double theta : {0.0, 0.4, std::numbers::pi / 4.0}) {
        auto c = small_config();
        c.theta = theta;
        const auto want = source_probabilities(theta);
        for (bool dense : {false, true}) {
            c.force_dense = dense;
            const auto st = equilibrate_ewfs(c, 42, 1);
            for (std::size_t x = 0; x < 2; ++x)
                for (std::size_t y = 0; y < 2; ++y) EXPECT_EQ(st.p_cd[x][y], want[x][y]);
            EXPECT_NEAR(st.p_c(0), 0.5, 1e-15);
            EXPECT_NEAR(st.p_d(1), 0.5, 1e-15);
            // dense diagonal blocks carry the same weights
            const Matrix rho = ewfs_density(st);
            const Eigen::Index sc = 8, dd = 8, sd = 4;
            for (Eigen::Index x = 0; x < 2; ++x) {
                for (Eigen::Index y = 0; y < 2; ++y) {
                    double tr = 0.0;
                    for (Eigen::Index a = 0; a < sc; ++a)
                        for (Eigen::Index b = 0; b < sd; ++b) {
                            const Eigen::Index idx = (x * sc + a) * dd + y * sd + b;
                            tr += rho(idx, idx).real();
                        }
                    EXPECT_NEAR(tr, want[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)], 1e-12);
                }
            }
        }
    }
}

TEST(EquilibrateEwfs, FactoredMatchesDense) {
    for (const auto& [nc, nec, nd, ned] : std::vector<std::array<int, 4>>{{2, 1, 1, 1}, {1, 1, 1, 1}, {3, 1, 1, 1}, {2, 2, 1, 1}, {1, 2, 2, 1}}) {
        EwfsConfig c;
        c.n_c = nc;
        c.n_ec = nec;
        c.n_d = nd;
        c.n_ed = ned;
        auto cd = c;
        cd.force_dense = true;
        for (std::uint64_t s = 0; s < 3; ++s) {
            const auto terms = sample_ewfs_terms(c, 7, s);
            const auto fa = equilibrate_ewfs(c, terms);
            const auto de = equilibrate_ewfs(cd, terms);
            ASSERT_EQ(fa.representation, Representation::Factored);
            EXPECT_LT(max_abs(ewfs_density(fa) - ewfs_density(de)), 1e-10);
            for (std::size_t x = 0; x < 2; ++x) {
                EXPECT_LT(max_abs(fa.rho_c[x].dense.matrix() - de.rho_c[x].dense.matrix()), 1e-10);
                EXPECT_LT(max_abs(fa.rho_ed[x].dense.matrix() - de.rho_ed[x].dense.matrix()), 1e-10);
            }
            EXPECT_NEAR(lf_epsilon(fa).varepsilon, lf_epsilon(de).varepsilon, 1e-10);
        }
    }
}

TEST(EquilibrateEwfs, DenseMatchesPinchOfFullInitialState) {
    // oracle: ρ12 ⊗ |0..0><0..0| reordered into (1, C, E_C, 2, D, E_D) by explicit index mapping
    auto c = small_config();
    c.theta = 0.6;
    const auto terms = sample_ewfs_terms(c, 3, 0);
    const Matrix rho12 = source_state(c.theta).matrix();
    Matrix init = Matrix::Zero(128, 128);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const int ia = (a >> 1) * 64 + (a & 1) * 4, ib = (b >> 1) * 64 + (b & 1) * 4;
            init(ia, ib) = rho12(a, b);
        }
    const auto ref = pinch_matrix(init, build_ewfs_h(c, terms).matrix(), c.degeneracy_tol);
    EXPECT_LT(max_abs(ewfs_density(equilibrate_ewfs(c, terms)) - ref.rho), 1e-10);
}

TEST(LfEpsilon, OrthogonalStatesAreIdeal) {
    EwfsState st;
    st.p_cd = source_probabilities(std::numbers::pi / 4.0);
    for (std::size_t x = 0; x < 2; ++x) {
        st.rho_c[x] = conditional_from_qubits({DensityOperator::basis(2, static_cast<Eigen::Index>(x)).matrix()});
    }
    const auto r = lf_epsilon(st);
    EXPECT_NEAR(r.varepsilon, 0.0, 1e-15);
    EXPECT_NEAR(r.bound, 2.0, 1e-14);
    EXPECT_TRUE(r.violable);
}

TEST(LfEpsilon, IndistinguishableStates) {
    EwfsState st;
    st.p_cd = source_probabilities(0.3);
    for (std::size_t x = 0; x < 2; ++x) st.rho_c[x] = conditional_from_qubits({identity(2) / 2.0});
    const auto r = lf_epsilon(st);
    EXPECT_NEAR(r.varepsilon, 0.5, 1e-15);
    EXPECT_FALSE(r.violable);
    EXPECT_NEAR(r.bound, 4.0, 1e-14);
}

TEST(LfEpsilon, ThresholdGivesTsirelsonBound) {
    const auto r = lf_report((std::sqrt(2.0) - 1.0) / 2.0);
    EXPECT_NEAR(r.bound, 2.0 * std::sqrt(2.0), 1e-15);
    EXPECT_FALSE(r.violable);
    EXPECT_TRUE(lf_report(0.2).violable);
    EXPECT_NEAR(kLfThreshold, 0.20710678118654752, 1e-16);
}

TEST(LfEpsilon, MatchesHelstromSuccess) {
    const auto st = equilibrate_ewfs(small_config(3, 2), 42, 4);
    const double succ = success_probability(st.rho_c[0].dense.matrix(), st.rho_c[1].dense.matrix(), 0.5,
                                            helstrom(st.rho_c[0].dense, st.rho_c[1].dense, 0.5));
    const auto r = lf_epsilon(st);
    EXPECT_NEAR(r.varepsilon, 1.0 - succ, 1e-12);
    EXPECT_GE(r.varepsilon, 0.0);
    EXPECT_LE(r.varepsilon, 0.5 + 1e-12);
}

TEST(LfEpsilon, MirroredLabsGiveSameValue) {
    EwfsConfig a;
    a.n_c = 2;
    a.n_ec = 1;
    a.n_d = 1;
    a.n_ed = 1;
    const auto ta = sample_ewfs_terms(a, 42, 2);
    EwfsConfig b = a;
    std::swap(b.n_c, b.n_d);
    std::swap(b.n_ec, b.n_ed);
    EwfsTerms tb{ta.d, ta.c};
    const auto sa = equilibrate_ewfs(a, ta);
    const auto sb = equilibrate_ewfs(b, tb);
    EXPECT_NEAR(lf_epsilon(sa, Lab::C).varepsilon, lf_epsilon(sb, Lab::D).varepsilon, 1e-12);
    EXPECT_NEAR(lf_epsilon(sa, Lab::D).varepsilon, lf_epsilon(sb, Lab::C).varepsilon, 1e-12);
}

TEST(Chsh, ProductStateGivesTwo) {
    const Matrix rho = DensityOperator::basis(4, 0).matrix();
    const Matrix z = pauli::z();
    EXPECT_NEAR(chsh_value(rho, z, z, z, z), 2.0, 1e-15);
}

TEST(Chsh, SingletReachesTsirelson) {
    const Matrix rho = source_state(0.0).matrix();
    const double v = chsh_value(rho, spin(0.0), spin(std::numbers::pi / 2.0), spin(3.0 * std::numbers::pi / 4.0),
                                spin(-3.0 * std::numbers::pi / 4.0));
    EXPECT_NEAR(v, 2.0 * std::sqrt(2.0), 1e-9);
}

TEST(Chsh, RejectsBadObservables) {
    const Matrix rho = DensityOperator::basis(4, 0).matrix();
    EXPECT_THROW(chsh_value(rho, 2.0 * pauli::z(), pauli::z(), pauli::z(), pauli::z()), InvariantError);
    EXPECT_THROW(chsh_value(rho, identity(4), identity(4), pauli::z(), pauli::z()), DimensionError);
}

TEST(Chsh, EquilibratedStatesAreSeparable) {
    std::mt19937_64 rng(2024);
    for (std::uint64_t s = 0; s < 4; ++s) {
        auto c = small_config();
        c.theta = 0.0;
        const auto st = equilibrate_ewfs(c, 42, s);
        for (int t = 0; t < 25; ++t) {
            const bool local = t % 2 == 0;
            const Matrix a0 = local ? random_system_observable(rng, 16) : random_dichotomic(rng, 16);
            const Matrix a1 = local ? random_system_observable(rng, 16) : random_dichotomic(rng, 16);
            const Matrix b0 = local ? random_system_observable(rng, 8) : random_dichotomic(rng, 8);
            const Matrix b1 = local ? random_system_observable(rng, 8) : random_dichotomic(rng, 8);
            EXPECT_LE(std::abs(chsh_value(st, a0, a1, b0, b1)), 2.0 + 1e-9);
        }
    }
}

TEST(Chsh, FactoredEvaluatorMatchesDenseMatrix) {
    std::mt19937_64 rng(5);
    const auto st = equilibrate_ewfs(small_config(), 42, 0);
    ASSERT_FALSE(st.joint.has_value());
    const Matrix rho = ewfs_density(st);
    for (int t = 0; t < 5; ++t) {
        const Matrix a0 = random_dichotomic(rng, 16), a1 = random_dichotomic(rng, 16);
        const Matrix b0 = random_dichotomic(rng, 8), b1 = random_dichotomic(rng, 8);
        EXPECT_NEAR(chsh_value(st, a0, a1, b0, b1), chsh_value(rho, a0, a1, b0, b1), 1e-12);
    }
}

TEST(LfEpsilon, DecreasesWithCharlieSize) {
    const int n = 100;
    std::vector<double> mean, sem;
    for (int nc = 1; nc <= 4; ++nc) {
        double m = 0, v = 0;
        std::vector<double> xs;
        for (int s = 0; s < n; ++s) xs.push_back(lf_epsilon(equilibrate_ewfs(small_config(nc, 1), 11, static_cast<std::uint64_t>(s))).varepsilon);
        for (double x : xs) m += x;
        m /= n;
        for (double x : xs) v += (x - m) * (x - m);
        mean.push_back(m);
        sem.push_back(std::sqrt(v / (n - 1) / n));
    }
    for (std::size_t k = 0; k + 1 < mean.size(); ++k) {
        EXPECT_GT(mean[k] - mean[k + 1], 3.0 * std::hypot(sem[k], sem[k + 1])) << "n_c=" << k + 1;
    }
}
