#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hcsearch {

using Position = std::uint64_t;

constexpr int max_dimension = 64;

// Hypercube dimension plus a sorted set of marked vertices.
class ProblemSpec {
public:
    ProblemSpec(int n, std::vector<Position> solutions)
        : n_(n), solutions_(std::move(solutions)) {
        if (n_ < 1 || n_ > max_dimension)
            throw std::invalid_argument("dimension must lie in [1, 64], got " + std::to_string(n_));
        if (solutions_.empty())
            throw std::invalid_argument("solution set must be non-empty");
        std::sort(solutions_.begin(), solutions_.end());
        if (std::adjacent_find(solutions_.begin(), solutions_.end()) != solutions_.end())
            throw std::invalid_argument("duplicate solution position");
        if (n_ < 64 && solutions_.back() >> n_)
            throw std::invalid_argument("solution position " + std::to_string(solutions_.back()) +
                                        " outside [0, 2^" + std::to_string(n_) + ")");
    }

    int dimension() const { return n_; }
    std::size_t solution_count() const { return solutions_.size(); }
    const std::vector<Position>& solutions() const { return solutions_; }

    // 2^n as a double; exact for every admissible n.
    double position_count() const { return std::ldexp(1.0, n_); }
    double workspace_dimension() const { return n_ * position_count(); }

private:
    int n_;
    std::vector<Position> solutions_;
};

inline int hamming_weight(Position p) { return std::popcount(p); }

// C(n, k) in exact 64-bit arithmetic; throws std::overflow_error when it does not fit.
inline std::int64_t binomial(int n, int k) {
    if (n < 0) throw std::invalid_argument("binomial: negative n");
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (int i = 0; i < k; ++i) {
        r = r * static_cast<unsigned>(n - i) / static_cast<unsigned>(i + 1);
        if (r > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max()))
            throw std::overflow_error("binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                                      ") overflows int64");
    }
    return static_cast<std::int64_t>(r);
}

namespace detail {

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("int64 multiplication overflow");
    return r;
}

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("int64 addition overflow");
    return r;
}

}  // namespace detail

// Number of weight-wp strings sharing an even number of set bits with a fixed weight-wm string.
inline std::int64_t zeta(int wm, int wp, int n) {
    if (wm < 0 || wm > n || wp < 0 || wp > n) throw std::invalid_argument("zeta: weight out of range");
    std::int64_t z = 0;
    for (int l = 0; 2 * l <= wm; ++l)
        z = detail::checked_add(z, detail::checked_mul(binomial(wm, 2 * l), binomial(n - wm, wp - 2 * l)));
    return z;
}

// Signed character sum over the weight-wp shell; never exceeds C(n, wp) in magnitude.
inline std::int64_t eta(int wp, int wm, int n) {
    return detail::checked_mul(2, zeta(wm, wp, n)) - binomial(n, wp);
}

// eta(wp, wm) for all weights of a fixed n.
class WeightTable {
public:
    explicit WeightTable(int n) : n_(n), values_((n + 1) * (n + 1)) {
        for (int wp = 0; wp <= n; ++wp)
            for (int wm = 0; wm <= n; ++wm) values_[wp * (n + 1) + wm] = hcsearch::eta(wp, wm, n);
    }
    int dimension() const { return n_; }
    std::int64_t eta(int wp, int wm) const { return values_[wp * (n_ + 1) + wm]; }

private:
    int n_;
    std::vector<std::int64_t> values_;
};

// Xi_w scaled by 2^n: integer entries eta(w, |a xor b|).
inline Eigen::MatrixXd xi_matrix_scaled(const ProblemSpec& spec, const WeightTable& table, int w) {
    const auto& sol = spec.solutions();
    const auto m = static_cast<Eigen::Index>(sol.size());
    Eigen::MatrixXd x(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            x(i, j) = static_cast<double>(table.eta(w, hamming_weight(sol[i] ^ sol[j])));
    return x;
}

inline Eigen::MatrixXd xi_matrix(const ProblemSpec& spec, const WeightTable& table, int w) {
    return std::ldexp(1.0, -spec.dimension()) * xi_matrix_scaled(spec, table, w);
}

inline Eigen::MatrixXd xi_matrix(const ProblemSpec& spec, int w) {
    if (w < 0 || w > spec.dimension()) throw std::invalid_argument("xi_matrix: weight out of range");
    return xi_matrix(spec, WeightTable(spec.dimension()), w);
}

struct RankTolerance {
    double relative = 1e-10;
    double absolute = 1e-14;
};

// Rank measured on the integer-scaled matrix so the absolute floor is independent of n.
inline int rank_xi(const ProblemSpec& spec, const WeightTable& table, int w, RankTolerance tol = {}) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xi_matrix_scaled(spec, table, w), Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double cut = std::max(tol.relative * ev.cwiseAbs().maxCoeff(), tol.absolute);
    return static_cast<int>((ev.array() > cut).count());
}

inline int rank_xi(const ProblemSpec& spec, int w, RankTolerance tol = {}) {
    return rank_xi(spec, WeightTable(spec.dimension()), w, tol);
}

// Dimension of the cyclic subspace generated by the initial state.
inline std::int64_t effective_dim(const ProblemSpec& spec, RankTolerance tol = {}) {
    const int n = spec.dimension();
    if (n < 2) throw std::invalid_argument("effective_dim requires n >= 2");
    const WeightTable table(n);
    std::int64_t total = 2;
    for (int w = 1; w < n; ++w) total += 2 * rank_xi(spec, table, w, tol);
    return total;
}

}  // namespace hcsearch
