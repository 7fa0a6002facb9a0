#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "simulator.hpp"
#include "spectral.hpp"

namespace hcsearch {

constexpr std::int64_t max_curve_length = 100000;
constexpr std::int64_t phasor_refresh = 1 << 12;

// p_t = |sum_k sum_l conj(s) u e^{i phi_k t}|^2, evaluated with running phasors that are
// reset to their exact value every phasor_refresh steps.
inline SuccessCurve probability_curve(const SpectralDecomposition& d, std::int64_t t_max) {
    if (t_max < 0 || t_max > max_curve_length)
        throw std::invalid_argument("probability_curve: t_max must lie in [0, 100000]");
    std::vector<double> phases;
    std::vector<Complex> weights;
    for (const auto& c : d.components) {
        const Complex wsum = c.weight_sum();
        if (wsum == Complex(0.0)) continue;
        phases.push_back(c.phi);
        weights.push_back(wsum);
    }
    const std::size_t k = phases.size();
    std::vector<Complex> step(k), phasor(k, Complex(1.0, 0.0));
    for (std::size_t i = 0; i < k; ++i) step[i] = std::polar(1.0, phases[i]);

    SuccessCurve c;
    c.source = CurveSource::spectral;
    c.approximate = !d.complete;
    c.probabilities.reserve(static_cast<std::size_t>(t_max) + 1);
    for (std::int64_t t = 0; t <= t_max; ++t) {
        if (t > 0 && t % phasor_refresh == 0)
            for (std::size_t i = 0; i < k; ++i) phasor[i] = std::polar(1.0, phases[i] * static_cast<double>(t));
        Complex amp = 0.0;
        for (std::size_t i = 0; i < k; ++i) amp += weights[i] * phasor[i];
        double p = std::norm(amp);
        if (p > 1.0 && p < 1.0 + 1e-10) p = 1.0;
        c.probabilities.push_back(p);
        for (std::size_t i = 0; i < k; ++i) phasor[i] *= step[i];
    }
    locate_peak(c);
    return c;
}

// (M/N) (sum_k f_k sum_l |s|^2)^2 with f_k = 1/|sin(phi_k/2)|, or 1 at phase pi.
inline double upper_bound(const SpectralDecomposition& d) {
    double acc = 0.0;
    for (const auto& c : d.components) {
        const double f = c.kind == PhaseKind::minus_one ? 1.0 : 1.0 / std::abs(std::sin(c.phi / 2));
        acc += f * c.s_norm2();
    }
    const double m_over_n = static_cast<double>(d.spec.solution_count()) / d.spec.position_count();
    return m_over_n * acc * acc;
}

struct OptimalIteration {
    std::int64_t t = 0;
    double p = 0.0;
};

inline OptimalIteration optimal_iteration(const SuccessCurve& c) {
    if (c.probabilities.empty()) throw std::invalid_argument("optimal_iteration: empty curve");
    const auto it = std::max_element(c.probabilities.begin(), c.probabilities.end());
    return {static_cast<std::int64_t>(it - c.probabilities.begin()), *it};
}

}  // namespace hcsearch
