#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "combinatorics.hpp"

namespace hcsearch {

using Complex = std::complex<double>;

constexpr int default_direct_limit = 22;

class ResourceLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Amplitudes on position x direction, flat index p * n + (d - 1).
struct WalkState {
    int n = 0;
    std::vector<Complex> amplitudes;

    std::size_t position_count() const { return amplitudes.size() / static_cast<std::size_t>(n); }
    Complex* block(Position p) { return amplitudes.data() + p * static_cast<std::size_t>(n); }
    const Complex* block(Position p) const { return amplitudes.data() + p * static_cast<std::size_t>(n); }
};

inline void check_direct_limit(int n, int limit) {
    if (n > limit)
        throw ResourceLimitError("direct simulation limited to n <= " + std::to_string(limit) + ", got " +
                                 std::to_string(n));
}

// Equal superposition over all positions and directions.
inline WalkState uniform_state(int n, int limit = default_direct_limit) {
    if (n < 1) throw std::invalid_argument("uniform_state: n must be positive");
    check_direct_limit(n, limit);
    const std::size_t size = (std::size_t{1} << n) * static_cast<std::size_t>(n);
    return WalkState{n, std::vector<Complex>(size, Complex(1.0 / std::sqrt(static_cast<double>(size)), 0.0))};
}

// Block b -> 2 <b, u> u - b on every position.
inline void apply_coin(WalkState& s) {
    const int n = s.n;
    const std::size_t positions = s.position_count();
    for (std::size_t p = 0; p < positions; ++p) {
        Complex* b = s.block(p);
        Complex mean = 0.0;
        for (int d = 0; d < n; ++d) mean += b[d];
        mean *= 2.0 / n;
        for (int d = 0; d < n; ++d) b[d] = mean - b[d];
    }
}

// Marked blocks get -G, i.e. b -> b - 2 <b, u> u.
inline void apply_oracle(WalkState& s, const ProblemSpec& spec) {
    const int n = s.n;
    for (Position p : spec.solutions()) {
        Complex* b = s.block(p);
        Complex mean = 0.0;
        for (int d = 0; d < n; ++d) mean += b[d];
        mean *= 2.0 / n;
        for (int d = 0; d < n; ++d) b[d] -= mean;
    }
}

// (p, d) <-> (p xor 2^(d-1), d).
inline void apply_shift(WalkState& s) {
    const int n = s.n;
    const std::size_t positions = s.position_count();
    for (std::size_t p = 0; p < positions; ++p)
        for (int d = 0; d < n; ++d) {
            const std::size_t q = p ^ (std::size_t{1} << d);
            if (p < q) std::swap(s.amplitudes[p * n + d], s.amplitudes[q * n + d]);
        }
}

inline void apply_walk_step(WalkState& s, const ProblemSpec& spec) {
    apply_oracle(s, spec);
    apply_coin(s);
    apply_shift(s);
}

// <s|psi> where |s> spreads uniformly over marked blocks and directions.
inline Complex solution_overlap(const WalkState& s, const ProblemSpec& spec) {
    Complex acc = 0.0;
    for (Position p : spec.solutions()) {
        const Complex* b = s.block(p);
        for (int d = 0; d < s.n; ++d) acc += b[d];
    }
    return acc / std::sqrt(static_cast<double>(spec.solution_count()) * s.n);
}

enum class CurveSource { direct, spectral };

struct SuccessCurve {
    std::vector<double> probabilities;
    std::int64_t argmax_t = 0;
    double max_p = 0.0;
    CurveSource source = CurveSource::direct;
    bool approximate = false;
};

// First index of the largest value; ties go to the smallest t.
inline void locate_peak(SuccessCurve& c) {
    const auto it = std::max_element(c.probabilities.begin(), c.probabilities.end());
    c.argmax_t = it - c.probabilities.begin();
    c.max_p = *it;
}

inline SuccessCurve simulate_curve(const ProblemSpec& spec, std::int64_t t_max, int limit = default_direct_limit) {
    if (t_max < 0) throw std::invalid_argument("simulate_curve: t_max must be non-negative");
    check_direct_limit(spec.dimension(), limit);
    WalkState s = uniform_state(spec.dimension(), limit);
    SuccessCurve c;
    c.source = CurveSource::direct;
    c.probabilities.reserve(static_cast<std::size_t>(t_max) + 1);
    for (std::int64_t t = 0;; ++t) {
        c.probabilities.push_back(std::norm(solution_overlap(s, spec)));
        if (t == t_max) break;
        apply_walk_step(s, spec);
    }
    locate_peak(c);
    return c;
}

}  // namespace hcsearch
