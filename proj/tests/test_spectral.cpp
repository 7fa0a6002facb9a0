#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <hcsearch/curve.hpp>
#include <hcsearch/operators.hpp>
#include <hcsearch/spectral.hpp>

#include "oracles.hpp"

using namespace hcsearch;

namespace {

struct TableRow {
    double phi, s;
    Complex u;
};

// Positive-phase half of the worked example table.
const TableRow worked_example[] = {
    {0.2231, 0.4382, {0.0775, -0.6917}},  {0.9434, 0.1769, {0.0313, -0.0613}},
    {1.3755, -0.1632, {-0.0289, 0.0351}}, {1.7661, 0.1632, {0.0289, -0.0237}},
    {2.1982, -0.1769, {-0.0313, 0.0160}}, {2.9185, -0.4382, {-0.0775, 0.0087}},
};

const PhaseComponent* find_component(const SpectralDecomposition& d, double phi, double tol) {
    for (const auto& c : d.components)
        if (std::abs(c.phi - phi) < tol) return &c;
    return nullptr;
}

// Dense projections <s|P_k|s> and <s|P_k|u> for every eigenphase of Q.
struct DenseProjection {
    double phi;
    double s_norm2;
    Complex weight;
};

std::vector<DenseProjection> dense_projections(const ProblemSpec& spec) {
    const Eigen::MatrixXd q = dense::walk_operators(spec).q;
    const Eigen::VectorXcd s = oracle::solution_state(spec).cast<Complex>();
    const Eigen::VectorXcd u = dense::uniform_vector(q.rows()).cast<Complex>();
    std::vector<DenseProjection> out;
    for (const auto& e : oracle::eigenspaces(q)) {
        const Eigen::VectorXcd ps = e.basis.adjoint() * s, pu = e.basis.adjoint() * u;
        out.push_back({e.phi, ps.squaredNorm(), ps.dot(pu)});
    }
    return out;
}

void expect_matches_dense(const ProblemSpec& spec, const SpectralDecomposition& d) {
    ASSERT_TRUE(d.complete);
    for (const auto& p : dense_projections(spec)) {
        double s2 = 0.0;
        Complex w = 0.0;
        for (const auto& c : d.components) {
            double delta = std::abs(c.phi - p.phi);
            delta = std::min(delta, 2 * pi - delta);
            if (delta < 1e-6) {
                s2 += c.s_norm2();
                w += c.weight_sum();
            }
        }
        EXPECT_NEAR(s2, p.s_norm2, 1e-8) << "phi " << p.phi;
        EXPECT_LT(std::abs(w - p.weight), 1e-8) << "phi " << p.phi;
    }
}

}  // namespace

TEST(DHat, Examples) {
    // n = 2, w = 1: pole at pi/2.
    EXPECT_NEAR(pole_phase(1, 2), pi / 2, 1e-15);
    EXPECT_TRUE(d_hat_entry(pi / 2, 1, 2).singular);
    EXPECT_THROW(d_hat_weights(pi / 2, 2), SingularPhaseError);
    EXPECT_NO_THROW(d_hat_weights(pi / 2, 2, 1));
    EXPECT_THROW(d_hat_entry(0.0, 1, 2), std::invalid_argument);
    EXPECT_THROW(d_hat_entry(pi, 1, 2), std::invalid_argument);
    for (double phi : {0.1, 0.7, 1.3, 2.9}) {
        EXPECT_NEAR(d_hat_entry(phi, 0, 5).value, 1.0 / std::tan(phi / 2), 1e-12);
        EXPECT_NEAR(d_hat_entry(phi, 5, 5).value, -std::tan(phi / 2), 1e-12);
        for (int w = 1; w < 5; ++w) {
            const double x = w / 5.0;
            const double naive = 1.0 / ((1 - x) * std::tan(phi / 2) - x / std::tan(phi / 2));
            EXPECT_NEAR(d_hat_entry(phi, w, 5).value, naive, 1e-10 * std::max(1.0, std::abs(naive)));
        }
    }
    EXPECT_NEAR(tan_weight(pi / 2, 3, 6), 1.0, 1e-14);
}

TEST(DHat, InverseOfBlockResolvent) {
    // On a weight-w block of the Fourier-domain walk, 2 z <u|(z - S(p) G)^{-1}|u> - 1 = -i D-hat.
    const int n = 6, w = 2;
    const double phi = 1.0;
    Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(n, n);
    const Eigen::MatrixXd g = dense::grover_diffusion(n);
    for (int d = 0; d < n; ++d)
        for (int e = 0; e < n; ++e) block(d, e) = (d < w ? -1.0 : 1.0) * g(d, e);
    const Complex z = std::polar(1.0, phi);
    const Eigen::MatrixXcd res = (z * Eigen::MatrixXcd::Identity(n, n) - block).inverse();
    const Eigen::VectorXcd un = dense::uniform_vector(n).cast<Complex>();
    const Complex r = un.dot(res * un);
    const Complex lhs = 2.0 * z * r - 1.0;
    EXPECT_NEAR(lhs.real(), 0.0, 1e-12);
    EXPECT_NEAR(lhs.imag(), -d_hat_entry(phi, w, n).value, 1e-10);
}

TEST(DS, MatchesDenseGram) {
    std::mt19937_64 rng(41);
    for (int n = 2; n <= 9; ++n) {
        const ProblemSpec spec = oracle::random_spec(rng, n, std::min(3, 1 << n));
        const SearchModel model(spec);
        for (double phi : {0.05, 0.4, 1.1, 2.0, 3.0}) {
            bool near_pole = false;
            for (int w = 0; w <= n; ++w) near_pole |= std::abs(phi - pole_phase(w, n)) < 1e-3;
            if (near_pole) continue;
            const std::vector<double> d = d_hat_weights(phi, n);
            const Eigen::MatrixXd ds = d_s_matrix(model, phi);
            EXPECT_LT((ds - oracle::weighted_gram(spec, d)).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, ds.norm()));
            // D-hat is odd in the phase.
            for (int w = 0; w <= n; ++w) {
                const double a = d_hat_entry(phi, w, n).value;
                const double b = 1.0 / ((1.0 - double(w) / n) * std::tan(-phi / 2) - (double(w) / n) / std::tan(-phi / 2));
                EXPECT_NEAR(a, -b, 1e-9 * std::max(1.0, std::abs(a)));
            }
        }
    }
}

TEST(FTransform, Examples) {
    const ProblemSpec spec(5, {1, 6, 22});
    const SearchModel model(spec);
    EXPECT_TRUE(f_transform(model, std::vector<double>(6, 1.0)).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-12));
    std::vector<double> w(6);
    for (int k = 0; k < 5; ++k) w[k] = double(k) / (5 - k);
    w[5] = 0.0;
    EXPECT_LT((f_transform(model, w) - oracle::weighted_gram(spec, w)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(f_transform(model, std::vector<double>(5, 1.0)), std::invalid_argument);
}

TEST(SearchModel, RequiresTwoDimensions) {
    EXPECT_THROW(SearchModel(ProblemSpec(1, {0})), std::invalid_argument);
    const SearchModel m(ProblemSpec(6, {3, 6}));
    EXPECT_EQ(m.effective_dim(), 22);
    EXPECT_NEAR(m.amplitude_scale(), std::sqrt(2.0 / 64), 1e-15);
}

TEST(Scan, WorkedExamplePhases) {
    const SearchModel model(ProblemSpec(6, {3, 6}));
    ScanOptions opt;
    opt.theta_step = pi / 10000;
    const ScanResult r = scan_and_refine(model, opt);
    EXPECT_TRUE(r.limits_ok(model));
    for (const auto& row : worked_example) {
        bool hit = false;
        for (const auto& root : r.roots) hit |= std::abs(root.phi - row.phi) < 5e-4;
        EXPECT_TRUE(hit) << row.phi;
    }
    for (const auto& root : r.roots) {
        EXPECT_GT(root.phi, 0.0);
        EXPECT_LT(root.phi, pi);
        EXPECT_LT(criterion(model, root.phi), 1e-8);
    }
    EXPECT_GT(criterion(model, 0.6), 1e-3);
    EXPECT_EQ(r.singular_multiplicity.size(), 7u);
    for (const auto& m : r.minima) EXPECT_TRUE(m.confirmed) << m.phi;
}

TEST(Decompose, WorkedExampleTable) {
    ScanOptions opt;
    opt.theta_step = pi / 10000;
    const SpectralDecomposition d = decompose(ProblemSpec(6, {3, 6}), opt);
    EXPECT_TRUE(d.complete);
    EXPECT_FALSE(d.rescanned);
    EXPECT_EQ(d.effective_dim, 22);
    EXPECT_EQ(d.found, 22);
    EXPECT_EQ(d.nonzero_components(), 12u);
    const double scale = std::sqrt(2.0 / 64);
    for (const auto& row : worked_example) {
        for (double sign : {1.0, -1.0}) {
            const PhaseComponent* c = find_component(d, sign * row.phi, 5e-4);
            ASSERT_NE(c, nullptr) << sign * row.phi;
            ASSERT_EQ(c->multiplicity, 1);
            const Complex expected_u = sign > 0 ? row.u : std::conj(row.u);
            EXPECT_NEAR(std::abs(c->s(0)), std::abs(row.s), 5e-4);
            EXPECT_NEAR(std::abs(c->u(0)), std::abs(expected_u), 5e-4);
            const Complex ratio = c->u(0) / c->s(0);
            EXPECT_LT(std::abs(ratio - expected_u / row.s), 5e-3);
            EXPECT_LT(std::abs(ratio - scale * Complex(1.0, -1.0 / std::tan(c->phi / 2))), 1e-12);
        }
    }
    EXPECT_NEAR(upper_bound(d), 0.5509, 5e-4);
}

TEST(Decompose, ClosureAndConjugateSymmetry) {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + trial % 9;
        const int m = 1 + static_cast<int>(rng() % std::min<std::uint64_t>(4, std::uint64_t{1} << n));
        const ProblemSpec spec = oracle::random_spec(rng, n, m);
        const SpectralDecomposition d = decompose(spec);
        ASSERT_TRUE(d.complete) << n << " " << m;
        double s2 = 0.0, u2 = 0.0;
        Complex wsum = 0.0;
        for (const auto& c : d.components) {
            s2 += c.s_norm2();
            u2 += c.u.squaredNorm();
            wsum += c.weight_sum();
        }
        EXPECT_NEAR(s2, 1.0, 1e-8);
        EXPECT_NEAR(u2, 1.0, 1e-8);
        EXPECT_NEAR(wsum.real(), std::sqrt(m / spec.position_count()), 1e-8);
        EXPECT_NEAR(wsum.imag(), 0.0, 1e-8);
        for (const auto& c : d.components) {
            if (c.kind == PhaseKind::minus_one) continue;
            const PhaseComponent* mirror = find_component(d, -c.phi, 1e-13);
            ASSERT_NE(mirror, nullptr);
            EXPECT_LT((mirror->u - c.u.conjugate()).norm(), 1e-14);
        }
    }
}

TEST(Decompose, MatchesDenseEigenprojectors) {
    std::mt19937_64 rng(43);
    for (int n = 2; n <= 6; ++n)
        for (int m = 1; m <= std::min(4, 1 << n); ++m) {
            const ProblemSpec spec = oracle::random_spec(rng, n, m);
            SCOPED_TRACE("n=" + std::to_string(n) + " M=" + std::to_string(m));
            expect_matches_dense(spec, decompose(spec));
        }
}

TEST(Decompose, SingularComponents) {
    // Antipodal pairs put weight on the pole at pi/2.
    for (const ProblemSpec& spec : {ProblemSpec(2, {0, 3}), ProblemSpec(6, {0, 63}), ProblemSpec(6, {9, 54})}) {
        const SpectralDecomposition d = decompose(spec);
        bool singular = false;
        for (const auto& c : d.components) singular |= c.kind == PhaseKind::singular && c.s.norm() > 1e-6;
        EXPECT_TRUE(singular);
        expect_matches_dense(spec, d);
    }
    const auto c = components_singular(SearchModel(ProblemSpec(6, {0, 63})), 3);
    ASSERT_TRUE(c.has_value());
    EXPECT_NEAR(c->phi, pi / 2, 1e-15);
    EXPECT_EQ(c->multiplicity, 1);
    EXPECT_NEAR(c->s.norm(), 0.242536, 1e-6);
    // Here the pole kernel mixes both blocks of the kernel vector.
    const ProblemSpec mixed(2, {0, 1, 3});
    const auto m = components_singular(SearchModel(mixed), 1);
    ASSERT_TRUE(m.has_value());
    EXPECT_NEAR(m->s.norm(), 1 / std::sqrt(6.0), 1e-10);
    expect_matches_dense(mixed, decompose(mixed));

    // The worked example has a kernel at pi/2 that carries no weight.
    const SearchModel model(ProblemSpec(6, {3, 6}));
    const auto empty = components_singular(model, 3, 1);
    if (empty) {
        EXPECT_NEAR(empty->s.norm(), 0.0, 1e-10);
    }
    EXPECT_THROW(components_singular(model, 0), std::invalid_argument);
}

TEST(Decompose, MinusOneComponent) {
    EXPECT_FALSE(components_minus_one(SearchModel(ProblemSpec(5, {9}))).has_value());
    // Solutions of mixed parity give the -1 eigenspace a nonzero overlap.
    const ProblemSpec spec(4, {1, 3, 7});
    const auto c = components_minus_one(SearchModel(spec));
    ASSERT_TRUE(c.has_value());
    EXPECT_EQ(c->multiplicity, 2);
    double dense_s2 = 0.0;
    for (const auto& p : dense_projections(spec))
        if (std::abs(std::abs(p.phi) - pi) < 1e-6) dense_s2 += p.s_norm2;
    EXPECT_NEAR(c->s_norm2(), dense_s2, 1e-10);
    EXPECT_LT((c->u - std::sqrt(3.0 / 16) * c->s).norm(), 1e-15);
}

TEST(Decompose, MatchesDirectSimulation) {
    std::mt19937_64 rng(44);
    for (int n = 2; n <= 8; ++n)
        for (int trial = 0; trial < 6; ++trial) {
            const int m = 1 + static_cast<int>(rng() % std::min<std::uint64_t>(4, std::uint64_t{1} << n));
            const ProblemSpec spec = oracle::random_spec(rng, n, m);
            const SuccessCurve a = probability_curve(decompose(spec), 200), b = simulate_curve(spec, 200);
            for (std::size_t t = 0; t <= 200; ++t)
                ASSERT_NEAR(a.probabilities[t], b.probabilities[t], 1e-7) << n << " " << m << " " << t;
        }
}

TEST(Decompose, LargeDimension) {
    const ProblemSpec spec(40, {0, 5, 1234567, (Position{1} << 40) - 1});
    const SpectralDecomposition d = decompose(spec);
    EXPECT_TRUE(d.complete);
    EXPECT_EQ(d.found, d.effective_dim);
    const SuccessCurve c = probability_curve(d, 10);
    EXPECT_NEAR(c.probabilities[0], 4.0 / spec.position_count(), 1e-18);
}

TEST(ScanOptions, Validation) {
    ScanOptions o;
    EXPECT_NO_THROW(o.validate());
    o.theta_step = 0;
    EXPECT_THROW(o.validate(), std::invalid_argument);
    o = {};
    o.refine_tol = -1;
    EXPECT_THROW(o.validate(), std::invalid_argument);
    o = {};
    o.zero_sv_tol = 0;
    EXPECT_THROW(o.validate(), std::invalid_argument);
    EXPECT_EQ(to_string(PhaseKind::minus_one), std::string("minus_one"));
}
