#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "combinatorics.hpp"
#include "simulator.hpp"

namespace hcsearch {

using std::numbers::pi;

struct ScanOptions {
    double theta_step = pi / 2000;
    double refine_tol = 1e-12;
    double zero_sv_tol = 1e-8;
    // Half-width of the window around each pole; defaults to twice the step.
    std::optional<double> singular_exclusion;
    RankTolerance rank_tol;
    double singular_tol = 4 * std::numeric_limits<double>::epsilon();

    double exclusion() const { return singular_exclusion.value_or(2 * theta_step); }

    // Singular values at or below this count as zero.
    double zero_threshold(double sigma_max) const { return std::max(zero_sv_tol * sigma_max, 1e-12); }

    void validate() const {
        if (!(theta_step > 0 && theta_step < pi / 4))
            throw std::invalid_argument("theta_step must lie in (0, pi/4)");
        if (!(refine_tol > 0)) throw std::invalid_argument("refine_tol must be positive");
        if (!(zero_sv_tol > 0)) throw std::invalid_argument("zero_sv_tol must be positive");
        if (!(exclusion() > 0)) throw std::invalid_argument("singular_exclusion must be positive");
    }
};

class SingularPhaseError : public std::domain_error {
public:
    SingularPhaseError(double phi, int weight)
        : std::domain_error("phase " + std::to_string(phi) + " coincides with pole of weight " +
                            std::to_string(weight)),
          weight_(weight) {}
    int weight() const { return weight_; }

private:
    int weight_;
};

// Phase at which the weight-w entry of D-hat has its pole.
inline double pole_phase(int w, int n) {
    if (w <= 0) return 0.0;
    if (w >= n) return pi;
    return std::acos(1.0 - 2.0 * w / n);
}

struct DHatEntry {
    double value = 0.0;
    bool singular = false;
    int weight = 0;
};

// 1 / ((1 - w/n) tan(phi/2) - (w/n) cot(phi/2)), written as a product of sines.
inline DHatEntry d_hat_entry(double phi, int w, int n, double singular_tol = ScanOptions{}.singular_tol) {
    if (!(phi > 0 && phi < pi)) throw std::invalid_argument("d_hat_entry: phi must lie in (0, pi)");
    if (w < 0 || w > n) throw std::invalid_argument("d_hat_entry: weight out of range");
    const double tw = pole_phase(w, n);
    const double s = std::sin(phi);
    const double den = 2.0 * std::sin((phi + tw) / 2) * std::sin((phi - tw) / 2);
    if (std::abs(den / s) < singular_tol) return {0.0, true, w};
    return {s / den, false, w};
}

// (1 - w/n) tan^2(phi/2) + (w/n) cot^2(phi/2).
inline double tan_weight(double phi, int w, int n) {
    const double t = std::tan(phi / 2);
    const double x = static_cast<double>(w) / n;
    return (1 - x) * t * t + x / (t * t);
}

struct PoleBasis {
    Eigen::MatrixXd range;
    Eigen::VectorXd range_eigs;
    Eigen::MatrixXd kernel;
};

// Xi_w matrices of a problem together with their range/kernel splits.
class SearchModel {
public:
    explicit SearchModel(ProblemSpec spec, RankTolerance tol = {}) : spec_(std::move(spec)) {
        const int n = spec_.dimension();
        if (n < 2) throw std::invalid_argument("spectral analysis requires n >= 2");
        const WeightTable table(n);
        const double scale = std::ldexp(1.0, -n);
        xi_.reserve(n + 1);
        poles_.reserve(n + 1);
        for (int w = 0; w <= n; ++w) {
            Eigen::MatrixXd scaled = xi_matrix_scaled(spec_, table, w);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled);
            const Eigen::VectorXd& ev = es.eigenvalues();
            const double cut = std::max(tol.relative * ev.cwiseAbs().maxCoeff(), tol.absolute);
            std::vector<Eigen::Index> keep, drop;
            for (Eigen::Index i = 0; i < ev.size(); ++i) (ev(i) > cut ? keep : drop).push_back(i);
            PoleBasis b;
            b.range = es.eigenvectors()(Eigen::all, keep);
            b.range_eigs = scale * ev(keep);
            b.kernel = es.eigenvectors()(Eigen::all, drop);
            xi_.push_back(scale * scaled);
            poles_.push_back(std::move(b));
        }
    }

    const ProblemSpec& spec() const { return spec_; }
    int dimension() const { return spec_.dimension(); }
    Eigen::Index solution_count() const { return static_cast<Eigen::Index>(spec_.solution_count()); }
    const Eigen::MatrixXd& xi(int w) const { return xi_[w]; }
    const PoleBasis& pole(int w) const { return poles_[w]; }
    int rank(int w) const { return static_cast<int>(poles_[w].range_eigs.size()); }

    std::int64_t effective_dim() const {
        std::int64_t total = 2;
        for (int w = 1; w < dimension(); ++w) total += 2 * rank(w);
        return total;
    }

    // sqrt(M / N)
    double amplitude_scale() const {
        return std::sqrt(static_cast<double>(spec_.solution_count()) / spec_.position_count());
    }

private:
    ProblemSpec spec_;
    std::vector<Eigen::MatrixXd> xi_;
    std::vector<PoleBasis> poles_;
};

// sum_w weights[w] Xi_w
inline Eigen::MatrixXd f_transform(const SearchModel& model, const std::vector<double>& weights) {
    if (static_cast<int>(weights.size()) != model.dimension() + 1)
        throw std::invalid_argument("f_transform: expected n + 1 weights");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(model.solution_count(), model.solution_count());
    for (int w = 0; w <= model.dimension(); ++w)
        if (weights[w] != 0.0) out += weights[w] * model.xi(w);
    return out;
}

// D-hat for every weight; throws SingularPhaseError unless the offending weight is skipped.
inline std::vector<double> d_hat_weights(double phi, int n, std::optional<int> skip = std::nullopt,
                                         double singular_tol = ScanOptions{}.singular_tol) {
    std::vector<double> d(n + 1, 0.0);
    for (int w = 0; w <= n; ++w) {
        if (skip && *skip == w) continue;
        const DHatEntry e = d_hat_entry(phi, w, n, singular_tol);
        if (e.singular) throw SingularPhaseError(phi, w);
        d[w] = e.value;
    }
    return d;
}

inline Eigen::MatrixXd d_s_matrix(const SearchModel& model, double phi,
                                  double singular_tol = ScanOptions{}.singular_tol) {
    return f_transform(model, d_hat_weights(phi, model.dimension(), std::nullopt, singular_tol));
}

inline Eigen::MatrixXd d_s_matrix(const ProblemSpec& spec, double phi) { return d_s_matrix(SearchModel(spec), phi); }

// Smallest singular value of the symmetric matrix D^s(phi).
inline double criterion(const SearchModel& model, double phi) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d_s_matrix(model, phi), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().minCoeff();
}

namespace detail {

inline int positives(const Eigen::VectorXd& ev) { return static_cast<int>((ev.array() > 0).count()); }

}  // namespace detail

// Number of positive eigenvalues of D^s(theta). With an anchor pole the count is taken
// blockwise: inertia of the range block plus inertia of its Schur complement.
inline int positive_count(const SearchModel& model, double theta, std::optional<int> anchor = std::nullopt) {
    const int n = model.dimension();
    if (!anchor) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d_s_matrix(model, theta), Eigen::EigenvaluesOnly);
        return detail::positives(es.eigenvalues());
    }
    const int w = *anchor;
    const PoleBasis& b = model.pole(w);
    const double dw = d_hat_entry(theta, w, n, 0.0).value;
    const Eigen::MatrixXd r = f_transform(model, d_hat_weights(theta, n, w, 0.0));
    Eigen::MatrixXd a = b.range.transpose() * r * b.range;
    a.diagonal() += dw * b.range_eigs;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a, Eigen::EigenvaluesOnly);
    int count = detail::positives(ea.eigenvalues());
    if (b.kernel.cols() > 0) {
        const Eigen::MatrixXd bb = b.range.transpose() * r * b.kernel;
        const Eigen::MatrixXd c = b.kernel.transpose() * r * b.kernel;
        Eigen::MatrixXd sc = c;
        if (a.size() > 0) sc -= bb.transpose() * a.partialPivLu().solve(bb);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sc + sc.transpose()), Eigen::EigenvaluesOnly);
        count += detail::positives(es.eigenvalues());
    }
    return count;
}

struct EigenphaseRoot {
    double phi = 0.0;
    int multiplicity = 0;
};

struct CriterionMinimum {
    double phi = 0.0;
    double sigma = 0.0;
    int svd_multiplicity = 0;
    bool confirmed = false;
};

struct ScanResult {
    std::vector<EigenphaseRoot> roots;
    // Kernel dimension at each interior pole, from the count jump across it.
    std::vector<int> singular_multiplicity;
    int count_near_zero = 0;
    int count_near_pi = 0;
    std::vector<CriterionMinimum> minima;
    std::size_t samples = 0;

    bool limits_ok(const SearchModel& model) const {
        return count_near_zero == 1 && count_near_pi == model.solution_count() - 1;
    }
};

class PhaseScanner {
public:
    PhaseScanner(const SearchModel& model, const ScanOptions& opt) : model_(model), opt_(opt) {
        opt_.validate();
        for (int w = 0; w <= model.dimension(); ++w) poles_.push_back(pole_phase(w, model.dimension()));
    }

    ScanResult run() {
        const int n = model_.dimension();
        const double excl = opt_.exclusion();
        const double step = opt_.theta_step;
        const double m_over_n = static_cast<double>(model_.solution_count()) / model_.spec().position_count();

        std::vector<double> grid;
        for (std::int64_t k = 1; k * step < pi; ++k)
            if (!zone(k * step)) grid.push_back(k * step);

        std::vector<double> pts = grid;
        for (int w = 0; w <= n; ++w) {
            const double dmin = (w == 0 || w == n) ? 0.5e-4 * std::sqrt(m_over_n)
                                                   : 16 * std::numeric_limits<double>::epsilon() *
                                                         std::max(1.0, poles_[w]);
            for (int sgn : {-1, 1}) {
                if ((w == 0 && sgn < 0) || (w == n && sgn > 0)) continue;
                double j = excl;
                for (; j > dmin; j /= 2) pts.push_back(poles_[w] + sgn * j);
                pts.push_back(poles_[w] + sgn * std::min(dmin, excl));
            }
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        pts.erase(std::remove_if(pts.begin(), pts.end(), [](double t) { return !(t > 0 && t < pi); }),
                  pts.end());

        std::vector<int> counts(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) counts[i] = count_at(pts[i]);

        extend_limit(pts, counts, true, 1);
        extend_limit(pts, counts, false, static_cast<int>(model_.solution_count()) - 1);
        for (int w = 1; w < n; ++w) tighten_pole(pts, counts, w);

        ScanResult res;
        res.singular_multiplicity.assign(n + 1, 0);
        res.count_near_zero = counts.front();
        res.count_near_pi = counts.back();
        std::vector<EigenphaseRoot> raw;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const int crossed = pole_between(pts[i], pts[i + 1]);
            if (crossed > 0) {
                res.singular_multiplicity[crossed] = counts[i] - counts[i + 1] + model_.rank(crossed);
                continue;
            }
            bisect(pts[i], pts[i + 1], counts[i], counts[i + 1], raw);
        }
        res.roots = merge(std::move(raw));
        res.samples = pts.size() + evaluations_;
        res.minima = criterion_minima(grid, res.roots);
        return res;
    }

private:
    double pole_distance(double t) const {
        double d = std::numeric_limits<double>::infinity();
        for (double p : poles_) d = std::min(d, std::abs(t - p));
        return d;
    }

    std::optional<int> zone(double t) const {
        const double excl = opt_.exclusion() * (1 + 1e-9);
        int best = -1;
        double d = std::numeric_limits<double>::infinity();
        for (int w = 0; w < static_cast<int>(poles_.size()); ++w)
            if (std::abs(t - poles_[w]) < d) d = std::abs(t - poles_[w]), best = w;
        if (d < excl) return best;
        return std::nullopt;
    }

    int count_at(double t) {
        ++evaluations_;
        return positive_count(model_, t, zone(t));
    }

    int pole_between(double lo, double hi) const {
        for (int w = 1; w + 1 < static_cast<int>(poles_.size()); ++w)
            if (lo < poles_[w] && poles_[w] < hi) return w;
        return 0;
    }

    // Push samples toward 0 or pi until the count reaches its limiting value.
    void extend_limit(std::vector<double>& pts, std::vector<int>& counts, bool at_zero, int target) {
        for (int guard = 0; guard < 1100; ++guard) {
            const int c = at_zero ? counts.front() : counts.back();
            if (c == target) return;
            const double edge = at_zero ? pts.front() : pi - pts.back();
            const double next = edge / 2;
            const double t = at_zero ? next : pi - next;
            if (!(t > 0 && t < pi) || t == (at_zero ? pts.front() : pts.back())) return;
            const int ct = count_at(t);
            if (at_zero) {
                pts.insert(pts.begin(), t);
                counts.insert(counts.begin(), ct);
            } else {
                pts.push_back(t);
                counts.push_back(ct);
            }
        }
    }

    // A jump across a pole larger than its kernel allows means a regular root hides inside
    // the innermost samples; move them inward until the jump is admissible.
    void tighten_pole(std::vector<double>& pts, std::vector<int>& counts, int w) {
        const double p = poles_[w];
        const double floor = 2 * (std::nextafter(p, pi) - p);
        for (int guard = 0; guard < 200; ++guard) {
            const auto hi = std::upper_bound(pts.begin(), pts.end(), p);
            if (hi == pts.begin() || hi == pts.end()) return;
            const std::size_t i = static_cast<std::size_t>(hi - pts.begin()) - 1;
            const int z = counts[i] - counts[i + 1] + model_.rank(w);
            if (z >= 0 && z <= model_.pole(w).kernel.cols()) return;
            const double left = p - pts[i], right = pts[i + 1] - p;
            if (left <= floor && right <= floor) return;
            const double tl = p - left / 2, tr = p + right / 2;
            const int cl = count_at(tl), cr = count_at(tr);
            pts.insert(pts.begin() + static_cast<std::ptrdiff_t>(i) + 1, {tl, tr});
            counts.insert(counts.begin() + static_cast<std::ptrdiff_t>(i) + 1, {cl, cr});
        }
    }

    double width_tol(double lo, double hi) const {
        return opt_.refine_tol * std::min({1.0, pole_distance(lo), pole_distance(hi)});
    }

    void bisect(double lo, double hi, int cl, int ch, std::vector<EigenphaseRoot>& out) {
        if (cl <= ch) return;
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= width_tol(lo, hi) || mid <= lo || mid >= hi) {
            out.push_back({mid, cl - ch});
            return;
        }
        const int cm = count_at(mid);
        bisect(lo, mid, cl, cm, out);
        bisect(mid, hi, cm, ch, out);
    }

    std::vector<EigenphaseRoot> merge(std::vector<EigenphaseRoot> raw) const {
        std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.phi < b.phi; });
        std::vector<EigenphaseRoot> out;
        for (const auto& r : raw) {
            if (!out.empty() &&
                r.phi - out.back().phi <= 4 * opt_.refine_tol * std::min(1.0, pole_distance(r.phi))) {
                auto& last = out.back();
                last.phi = (last.phi * last.multiplicity + r.phi * r.multiplicity) /
                           (last.multiplicity + r.multiplicity);
                last.multiplicity += r.multiplicity;
            } else {
                out.push_back(r);
            }
        }
        return out;
    }

    // Local minima of the smallest singular value on the uniform grid, refined and
    // matched against the inertia roots.
    std::vector<CriterionMinimum> criterion_minima(const std::vector<double>& grid,
                                                   const std::vector<EigenphaseRoot>& roots) const {
        std::vector<double> sigma(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) sigma[i] = criterion(model_, grid[i]);
        const double step = opt_.theta_step;
        std::vector<CriterionMinimum> out;
        for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
            const bool contiguous = grid[i] - grid[i - 1] < 1.5 * step && grid[i + 1] - grid[i] < 1.5 * step;
            if (!contiguous || !(sigma[i] < sigma[i - 1] && sigma[i] <= sigma[i + 1])) continue;
            const auto f = [this](double t) { return criterion(model_, t); };
            const auto [phi, sig] = boost::math::tools::brent_find_minima(f, grid[i - 1], grid[i + 1], 40);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d_s_matrix(model_, phi), Eigen::EigenvaluesOnly);
            const Eigen::ArrayXd sv = es.eigenvalues().cwiseAbs().array();
            CriterionMinimum m{phi, sig, static_cast<int>((sv <= opt_.zero_threshold(sv.maxCoeff())).count()), false};
            for (const auto& r : roots)
                if (r.phi >= grid[i - 1] && r.phi <= grid[i + 1]) m.confirmed = true;
            out.push_back(m);
        }
        return out;
    }

    const SearchModel& model_;
    ScanOptions opt_;
    std::vector<double> poles_;
    std::size_t evaluations_ = 0;
};

inline ScanResult scan_and_refine(const SearchModel& model, const ScanOptions& opt = {}) {
    return PhaseScanner(model, opt).run();
}

enum class PhaseKind { regular, minus_one, singular };

inline const char* to_string(PhaseKind k) {
    switch (k) {
        case PhaseKind::regular: return "regular";
        case PhaseKind::minus_one: return "minus_one";
        case PhaseKind::singular: return "singular";
    }
    return "unknown";
}

// Overlaps of the initial state (u) and the solution state (s) with one eigenspace of Q.
struct PhaseComponent {
    double phi = 0.0;
    int multiplicity = 0;
    Eigen::VectorXcd s;
    Eigen::VectorXcd u;
    PhaseKind kind = PhaseKind::regular;
    int weight = -1;

    double s_norm2() const { return s.squaredNorm(); }
    // sum_l conj(s) u
    Complex weight_sum() const { return s.dot(u); }
};

namespace detail {

// Solves for the overlaps given the Gram matrix of the unnormalised kernel vectors and the
// raw overlaps s'. The result is rotated inside the eigenspace so that it reads (|s|, 0, ...).
inline Eigen::VectorXcd corrected_overlaps(const Eigen::MatrixXcd& gram, const Eigen::VectorXcd& raw, int multiplicity) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(multiplicity);
    if (multiplicity == 0) return out;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (gram + gram.adjoint()));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > 0)) return out;
    double norm2 = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > 1e-12 * top) norm2 += std::norm(es.eigenvectors().col(i).dot(raw)) / ev(i);
    out(0) = std::sqrt(norm2);
    return out;
}

inline Eigen::VectorXcd uniform_solution_vector(Eigen::Index m) {
    return Eigen::VectorXcd::Constant(m, Complex(1.0 / std::sqrt(static_cast<double>(m)), 0.0));
}

inline PhaseComponent finish_positive(const SearchModel& model, double phi, Eigen::VectorXcd s, PhaseKind kind,
                                      int weight) {
    PhaseComponent c;
    c.phi = phi;
    c.multiplicity = static_cast<int>(s.size());
    c.kind = kind;
    c.weight = weight;
    const Complex ratio = model.amplitude_scale() * Complex(1.0, -1.0 / std::tan(phi / 2));
    c.u = ratio * s;
    c.s = std::move(s);
    return c;
}

}  // namespace detail

inline PhaseComponent components_regular(const SearchModel& model, double phi, int multiplicity) {
    const int n = model.dimension();
    if (multiplicity < 1 || multiplicity > model.solution_count())
        throw std::invalid_argument("components_regular: bad multiplicity");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d_s_matrix(model, phi, 0.0));
    std::vector<Eigen::Index> order(es.eigenvalues().size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        return std::abs(es.eigenvalues()(a)) < std::abs(es.eigenvalues()(b));
    });
    order.resize(multiplicity);
    const Eigen::MatrixXd e1 = es.eigenvectors()(Eigen::all, order);

    const std::vector<double> d = d_hat_weights(phi, n, std::nullopt, 0.0);
    std::vector<double> g(n + 1);
    for (int w = 0; w <= n; ++w) g[w] = d[w] * d[w] * (1 + tan_weight(phi, w, n));
    const Eigen::MatrixXd gram = e1.transpose() * f_transform(model, g) * e1;
    const Eigen::VectorXcd raw = (e1.transpose() * detail::uniform_solution_vector(model.solution_count()).real())
                                     .cast<Complex>();
    return detail::finish_positive(model, phi, detail::corrected_overlaps(gram.cast<Complex>(), raw, multiplicity),
                                   PhaseKind::regular, -1);
}

// Component at phase pi; absent for a single solution.
inline std::optional<PhaseComponent> components_minus_one(const SearchModel& model) {
    const int n = model.dimension();
    const Eigen::Index m = model.solution_count();
    if (m < 2) return std::nullopt;
    const double inv = 1.0 / std::sqrt(model.spec().position_count());
    Eigen::RowVectorXd h(m);
    for (Eigen::Index k = 0; k < m; ++k) h(k) = (hamming_weight(model.spec().solutions()[k]) % 2 ? -inv : inv);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullV);
    const Eigen::MatrixXd e1 = svd.matrixV().rightCols(m - 1);

    std::vector<double> g(n + 1, 1.0);
    for (int w = 0; w < n; ++w) g[w] = static_cast<double>(n) / (n - w);
    const Eigen::MatrixXd gram = e1.transpose() * f_transform(model, g) * e1;
    const Eigen::VectorXcd raw =
        (e1.transpose() * detail::uniform_solution_vector(m).real()).cast<Complex>();

    PhaseComponent c;
    c.phi = pi;
    c.multiplicity = static_cast<int>(m - 1);
    c.kind = PhaseKind::minus_one;
    c.s = detail::corrected_overlaps(gram.cast<Complex>(), raw, c.multiplicity);
    c.u = model.amplitude_scale() * c.s;
    return c;
}

// Component at the pole theta_w. With an expected multiplicity the kernel is taken as that
// many smallest singular directions, otherwise by the zero_sv_tol threshold.
inline std::optional<PhaseComponent> components_singular(const SearchModel& model, int w,
                                                         std::optional<int> multiplicity = std::nullopt,
                                                         const ScanOptions& opt = {}) {
    const int n = model.dimension();
    if (w < 1 || w >= n) throw std::invalid_argument("components_singular: weight must lie in [1, n-1]");
    const PoleBasis& b = model.pole(w);
    const Eigen::Index k = b.kernel.cols();
    const Eigen::Index r = b.range.cols();
    if (k == 0) return std::nullopt;
    const double phi = pole_phase(w, n);
    const std::vector<double> d = d_hat_weights(phi, n, w);
    const Eigen::MatrixXd rest = f_transform(model, d);

    Eigen::MatrixXcd a(model.solution_count(), k + r);
    a.leftCols(k) = Complex(0.0, 1.0) * (rest * b.kernel).cast<Complex>();
    a.rightCols(r) = (b.range * b.range_eigs.cwiseSqrt().asDiagonal()).cast<Complex>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullV);
    Eigen::VectorXd sv = Eigen::VectorXd::Zero(k + r);
    sv.head(svd.singularValues().size()) = svd.singularValues();

    int z = 0;
    if (multiplicity) {
        z = std::clamp<int>(*multiplicity, 0, static_cast<int>(k));
    } else {
        const double cut = opt.zero_threshold(sv.maxCoeff());
        z = static_cast<int>((sv.array() <= cut).count());
        z = std::min<int>(z, static_cast<int>(k));
    }
    if (z == 0) return std::nullopt;
    const Eigen::MatrixXcd ker = svd.matrixV().rightCols(z);
    const Eigen::MatrixXcd e1 = b.kernel.cast<Complex>() * ker.topRows(k);
    const Eigen::MatrixXcd x = ker.bottomRows(r);

    std::vector<double> g(n + 1);
    for (int v = 0; v <= n; ++v) g[v] = d[v] * d[v] * (1 + (v == w ? 1.0 : tan_weight(phi, v, n)));
    const Eigen::MatrixXcd gram =
        e1.adjoint() * f_transform(model, g).cast<Complex>() * e1 + 2.0 * x.adjoint() * x;
    const Eigen::VectorXcd raw = e1.adjoint() * detail::uniform_solution_vector(model.solution_count());
    return detail::finish_positive(model, phi, detail::corrected_overlaps(gram, raw, z), PhaseKind::singular, w);
}

struct SpectralDecomposition {
    ProblemSpec spec;
    std::vector<PhaseComponent> components{};
    std::int64_t effective_dim = 0;
    // Multiplicities accounted for, including the unconstructed +1 eigenspace.
    std::int64_t found = 0;
    bool complete = false;
    bool rescanned = false;
    ScanOptions options{};
    int count_near_zero = 0;
    int count_near_pi = 0;
    std::size_t samples = 0;
    std::size_t minima = 0;
    std::size_t discarded_minima = 0;

    std::size_t nonzero_components(double tol = 1e-10) const {
        return static_cast<std::size_t>(std::count_if(components.begin(), components.end(),
                                                      [tol](const auto& c) { return c.s.norm() > tol; }));
    }
};

inline SpectralDecomposition assemble(const SearchModel& model, const ScanResult& scan, const ScanOptions& opt) {
    const int n = model.dimension();
    const Eigen::Index m = model.solution_count();
    SpectralDecomposition out{.spec = model.spec()};
    out.effective_dim = model.effective_dim();
    out.options = opt;
    out.count_near_zero = scan.count_near_zero;
    out.count_near_pi = scan.count_near_pi;
    out.samples = scan.samples;
    out.minima = scan.minima.size();
    out.discarded_minima = static_cast<std::size_t>(
        std::count_if(scan.minima.begin(), scan.minima.end(), [](const auto& x) { return !x.confirmed; }));

    std::vector<PhaseComponent> positive;
    std::int64_t half = 0;
    for (const auto& r : scan.roots) {
        positive.push_back(components_regular(model, r.phi, r.multiplicity));
        half += r.multiplicity;
    }
    bool sane = true;
    for (int w = 1; w < n; ++w) {
        const int z = scan.singular_multiplicity[w];
        if (z < 0 || z > model.pole(w).kernel.cols()) sane = false;
        if (z <= 0) continue;
        if (auto c = components_singular(model, w, z, opt)) {
            half += c->multiplicity;
            positive.push_back(std::move(*c));
        }
    }
    for (auto& c : positive) {
        PhaseComponent conj = c;
        conj.phi = -c.phi;
        conj.s = c.s.conjugate();
        conj.u = c.u.conjugate();
        out.components.push_back(std::move(c));
        out.components.push_back(std::move(conj));
    }
    std::int64_t minus_one = 0;
    if (auto c = components_minus_one(model)) {
        minus_one = c->multiplicity;
        out.components.push_back(std::move(*c));
    }
    std::sort(out.components.begin(), out.components.end(),
              [](const auto& a, const auto& b) { return a.phi < b.phi; });
    out.found = 2 * half + minus_one + (m - 1);
    out.complete = sane && scan.limits_ok(model) && out.found == out.effective_dim;
    return out;
}

// Full eigenphase decomposition of the initial and solution states. A shortfall triggers one
// rescan at half the step; if that also falls short the result is flagged incomplete.
inline SpectralDecomposition decompose(const ProblemSpec& spec, const ScanOptions& opt = {}) {
    opt.validate();
    const SearchModel model(spec, opt.rank_tol);
    SpectralDecomposition d = assemble(model, scan_and_refine(model, opt), opt);
    if (d.complete) return d;
    ScanOptions finer = opt;
    finer.theta_step = opt.theta_step / 2;
    if (opt.singular_exclusion) finer.singular_exclusion = *opt.singular_exclusion / 2;
    SpectralDecomposition again = assemble(model, scan_and_refine(model, finer), finer);
    again.rescanned = true;
    return again;
}

}  // namespace hcsearch
