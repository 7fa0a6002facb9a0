#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "combinatorics.hpp"

namespace hcsearch::dense {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr int dense_limit = 9;

inline void check_dense(int n) {
    if (n < 1 || n > dense_limit)
        throw std::length_error("dense operators limited to 1 <= n <= " + std::to_string(dense_limit) + ", got " +
                                std::to_string(n));
}

inline Eigen::Index positions(int n) { return Eigen::Index{1} << n; }

// H^{(x)n}, entries (-1)^{popcount(a & b)} / sqrt(N).
inline MatrixXd hadamard(int n) {
    check_dense(n);
    const Eigen::Index big = positions(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(big));
    MatrixXd h(big, big);
    for (Eigen::Index a = 0; a < big; ++a)
        for (Eigen::Index b = 0; b < big; ++b) h(a, b) = (std::popcount(static_cast<std::uint64_t>(a & b)) % 2) ? -scale : scale;
    return h;
}

// Commutation matrix: A (x) B = P(a, b) (B (x) A) P(a, b)^T for A a x a, B b x b.
inline MatrixXd perfect_shuffle(Eigen::Index a, Eigen::Index b) {
    if (a < 1 || b < 1) throw std::invalid_argument("perfect_shuffle: sizes must be positive");
    MatrixXd p = MatrixXd::Zero(a * b, a * b);
    for (Eigen::Index i = 0; i < a; ++i)
        for (Eigen::Index j = 0; j < b; ++j) p(i * b + j, j * a + i) = 1.0;
    return p;
}

inline MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// -I + 2 |u><u| on the coin space.
inline MatrixXd grover_diffusion(int n) {
    return MatrixXd::Constant(n, n, 2.0 / n) - MatrixXd::Identity(n, n);
}

// Shift built as P S^{CS} P^T, S^{CS} = blockdiag_d( I^{(x)(n-d)} (x) X (x) I^{(x)(d-1)} ).
inline MatrixXd shift(int n) {
    check_dense(n);
    const Eigen::Index big = positions(n);
    MatrixXd cs = MatrixXd::Zero(n * big, n * big);
    MatrixXd x(2, 2);
    x << 0, 1, 1, 0;
    for (int d = 1; d <= n; ++d) {
        const MatrixXd sd = kron(kron(MatrixXd::Identity(positions(n - d), positions(n - d)), x),
                                 MatrixXd::Identity(positions(d - 1), positions(d - 1)));
        cs.block((d - 1) * big, (d - 1) * big, big, big) = sd;
    }
    const MatrixXd p = perfect_shuffle(big, n);
    return p * cs * p.transpose();
}

inline MatrixXd coin(int n) {
    check_dense(n);
    return kron(MatrixXd::Identity(positions(n), positions(n)), grover_diffusion(n));
}

inline MatrixXd oracle(const ProblemSpec& spec) {
    const int n = spec.dimension();
    check_dense(n);
    MatrixXd o = MatrixXd::Identity(n * positions(n), n * positions(n));
    const MatrixXd g = grover_diffusion(n);
    for (Position p : spec.solutions()) o.block(static_cast<Eigen::Index>(p) * n, static_cast<Eigen::Index>(p) * n, n, n) = -g;
    return o;
}

// H (x) I_n
inline MatrixXd fourier(int n) {
    return kron(hadamard(n), MatrixXd::Identity(n, n));
}

struct WalkOperators {
    MatrixXd u;  // S C
    MatrixXd q;  // S C O
};

inline WalkOperators walk_operators(const ProblemSpec& spec) {
    const int n = spec.dimension();
    const MatrixXd sc = shift(n) * coin(n);
    return {sc, sc * oracle(spec)};
}

inline VectorXd uniform_vector(Eigen::Index size) {
    return VectorXd::Constant(size, 1.0 / std::sqrt(static_cast<double>(size)));
}

struct SpectrumEntry {
    Complex eigenvalue;
    std::int64_t multiplicity = 0;
};

// Eigenvalues of the unperturbed walk: +1 and -1 with N_e/2 - N + 2 each, and
// 1 - 2w/n -+ (2i/n) sqrt(w(n-w)) with C(n, w) each for 0 < w < n.
inline std::vector<SpectrumEntry> uniform_walk_spectrum(int n) {
    if (n < 1 || n > 56) throw std::invalid_argument("uniform_walk_spectrum: n must lie in [1, 56]");
    const std::int64_t big = std::int64_t{1} << n;
    const std::int64_t pm = n * big / 2 - big + 2;
    std::vector<SpectrumEntry> out{{Complex(1.0, 0.0), pm}, {Complex(-1.0, 0.0), pm}};
    for (int w = 1; w < n; ++w) {
        const double re = 1.0 - 2.0 * w / n;
        const double im = 2.0 / n * std::sqrt(static_cast<double>(w) * (n - w));
        out.push_back({Complex(re, im), binomial(n, w)});
        out.push_back({Complex(re, -im), binomial(n, w)});
    }
    return out;
}

// Orthonormal basis of u_m^perp, Helmert construction.
inline MatrixXd helmert(Eigen::Index m) {
    MatrixXd out = MatrixXd::Zero(m, std::max<Eigen::Index>(m - 1, 0));
    for (Eigen::Index j = 1; j < m; ++j) {
        const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
        out.topRows(j).col(j - 1).setConstant(1.0 / norm);
        out(j, j - 1) = -static_cast<double>(j) / norm;
    }
    return out;
}

// Column generators of the invariant subspaces used in the eigenstructure analysis.
struct GeneratorSet {
    MatrixXd l1;        // |1_p> (x) |u_n> over solutions
    MatrixXd l2;        // |1_p> (x) |u_n> over the other positions
    MatrixXd l3;        // I_N (x) Lambda
    MatrixXd l3_minus;  // Fourier domain, on signature -1 slots, orthogonal to u
    MatrixXd l3_plus;   // Fourier domain, on signature +1 slots, orthogonal to u
    MatrixXd l3_circ;   // Fourier domain, one per position with 0 < w < n
};

inline GeneratorSet generators(const ProblemSpec& spec) {
    const int n = spec.dimension();
    check_dense(n);
    const Eigen::Index big = positions(n);
    const Eigen::Index ne = n * big;
    GeneratorSet g;
    const VectorXd un = uniform_vector(n);
    std::vector<bool> marked(static_cast<std::size_t>(big), false);
    for (Position p : spec.solutions()) marked[p] = true;
    const auto m = static_cast<Eigen::Index>(spec.solution_count());
    g.l1 = MatrixXd::Zero(ne, m);
    g.l2 = MatrixXd::Zero(ne, big - m);
    for (Eigen::Index p = 0, i1 = 0, i2 = 0; p < big; ++p) {
        if (marked[p]) g.l1.col(i1++).segment(p * n, n) = un;
        else g.l2.col(i2++).segment(p * n, n) = un;
    }
    g.l3 = kron(MatrixXd::Identity(big, big), helmert(n));

    std::vector<VectorXd> minus, plus, circ;
    for (Eigen::Index p = 0; p < big; ++p) {
        std::vector<Eigen::Index> set, clear;
        for (int d = 0; d < n; ++d) ((p >> d) & 1 ? set : clear).push_back(p * n + d);
        const auto w = static_cast<Eigen::Index>(set.size());
        const MatrixXd hm = helmert(w), hp = helmert(n - w);
        for (Eigen::Index c = 0; c < hm.cols(); ++c) {
            VectorXd v = VectorXd::Zero(ne);
            for (Eigen::Index r = 0; r < w; ++r) v(set[r]) = hm(r, c);
            minus.push_back(v);
        }
        for (Eigen::Index c = 0; c < hp.cols(); ++c) {
            VectorXd v = VectorXd::Zero(ne);
            for (Eigen::Index r = 0; r < n - w; ++r) v(clear[r]) = hp(r, c);
            plus.push_back(v);
        }
        if (w > 0 && w < n) {
            VectorXd v = VectorXd::Zero(ne);
            const double a = std::sqrt(static_cast<double>(n - w) / (n * w));
            const double b = -std::sqrt(static_cast<double>(w) / (n * (n - w)));
            for (auto i : set) v(i) = a;
            for (auto i : clear) v(i) = b;
            circ.push_back(v);
        }
    }
    const auto pack = [ne](const std::vector<VectorXd>& cols) {
        MatrixXd out(ne, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = cols[i];
        return out;
    };
    g.l3_minus = pack(minus);
    g.l3_plus = pack(plus);
    g.l3_circ = pack(circ);
    return g;
}

// Orthonormal basis of the null space of a stack of (A_i - lambda_i I).
inline MatrixXcd joint_eigenspace(const std::vector<MatrixXcd>& ops, const std::vector<Complex>& values,
                                  double tol = 1e-8) {
    if (ops.empty() || ops.size() != values.size()) throw std::invalid_argument("joint_eigenspace: bad arguments");
    const Eigen::Index dim = ops.front().cols();
    MatrixXcd stack(dim * static_cast<Eigen::Index>(ops.size()), dim);
    for (std::size_t i = 0; i < ops.size(); ++i)
        stack.middleRows(static_cast<Eigen::Index>(i) * dim, dim) =
            ops[i] - values[i] * MatrixXcd::Identity(dim, dim);
    Eigen::BDCSVD<MatrixXcd> svd(stack, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > tol) ++rank;
    return svd.matrixV().rightCols(dim - rank);
}

inline MatrixXcd eigenspace(const MatrixXcd& a, Complex value, double tol = 1e-8) {
    return joint_eigenspace({a}, {value}, tol);
}

inline Eigen::Index rank(const MatrixXcd& a, double tol = 1e-8) {
    if (a.cols() == 0) return 0;
    Eigen::BDCSVD<MatrixXcd> svd(a);
    return (svd.singularValues().array() > tol).count();
}

// Orthonormal basis of the column span.
inline MatrixXcd orthonormal_basis(const MatrixXcd& a, double tol = 1e-8) {
    if (a.cols() == 0) return MatrixXcd(a.rows(), 0);
    Eigen::BDCSVD<MatrixXcd> svd(a, Eigen::ComputeThinU);
    return svd.matrixU().leftCols(rank(a, tol));
}

// Orthogonal projectors of the two column spans agree in Frobenius norm.
inline bool same_span(const MatrixXcd& a, const MatrixXcd& b, double tol = 1e-8) {
    const MatrixXcd qa = orthonormal_basis(a), qb = orthonormal_basis(b);
    return (qa * qa.adjoint() - qb * qb.adjoint()).norm() <= tol;
}

}  // namespace hcsearch::dense
