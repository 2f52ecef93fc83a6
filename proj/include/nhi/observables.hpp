#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "nhi/characteristic.hpp"
#include "nhi/error.hpp"
#include "nhi/model.hpp"
#include "nhi/oracle.hpp"

namespace nhi {

/// Inverse participation ratio sum |psi|^4 / (sum |psi|^2)^2.
inline double ipr(const CVector& psi) {
    double s2 = 0.0;
    double s4 = 0.0;
    const double scale = psi.cwiseAbs().maxCoeff();
    if (!(scale > 0.0))
        throw Error(ErrorKind::InvalidInput, "ipr: zero vector");
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
        const double a = std::norm(psi(i) / scale);
        s2 += a;
        s4 += a * a;
    }
    return s4 / (s2 * s2);
}

/// Mean IPR over modes; the bound state is left out unless includeBound.
inline double average_ipr(const std::vector<ModeSolution>& modes, bool includeBound = false) {
    double sum = 0.0;
    int count = 0;
    for (const auto& m : modes) {
        if (!includeBound && m.root.kind == RootKind::Bound)
            continue;
        sum += ipr(m.amplitudes);
        ++count;
    }
    if (count == 0)
        throw Error(ErrorKind::InvalidInput, "average_ipr: no modes selected");
    return sum / count;
}

/// Absolute tolerance on |Im E| for calling an energy real.
inline constexpr double kRealnessTolerance = 1e-8;

struct SpectrumReport {
    int nReal = 0;
    int nComplexPairs = 0;
    int nComplex = 0;
    bool boundState = false;
    bool fullyReal = false; ///< over bulk modes only
    double maxImagAbs = 0.0; ///< over bulk modes only
};

/// Counts over an energy list where `isBound` marks the excluded bound mode.
inline SpectrumReport classify_energies(const std::vector<cplx>& energies, const std::vector<bool>& isBound,
                                        double tol = kRealnessTolerance) {
    SpectrumReport r;
    for (std::size_t i = 0; i < energies.size(); ++i) {
        if (isBound[i]) {
            r.boundState = true;
            continue;
        }
        const double im = std::abs(energies[i].imag());
        r.maxImagAbs = std::max(r.maxImagAbs, im);
        if (im <= tol)
            ++r.nReal;
        else
            ++r.nComplex;
    }
    r.nComplexPairs = r.nComplex / 2;
    r.fullyReal = r.nComplex == 0;
    return r;
}

inline SpectrumReport classify_spectrum(const std::vector<ModeSolution>& modes, double tol = kRealnessTolerance) {
    std::vector<cplx> e;
    std::vector<bool> bound;
    for (const auto& m : modes) {
        e.push_back(m.energy);
        bound.push_back(m.root.kind == RootKind::Bound);
    }
    return classify_energies(e, bound, tol);
}

enum class Direction { Left, Right, Flat };

inline const char* to_string(Direction d) {
    switch (d) {
    case Direction::Left: return "left";
    case Direction::Right: return "right";
    case Direction::Flat: return "flat";
    }
    return "unknown";
}

/// Left: amplitude grows with n (decays towards the left end).
/// Right: amplitude decays with n.
struct LocalizationProfile {
    Direction direction = Direction::Flat;
    double expectedSlope = 0.0; ///< sgn(g) (|g| - |Im theta|), the growth rate of ln|psi_n|
    double fittedSlope = 0.0;   ///< least squares over n in [N/4, 3N/4]
    double thetaImagAbs = 0.0;
};

inline constexpr double kFlatTolerance = 1e-7;

inline double fitted_log_slope(const CVector& psi) {
    const int N = static_cast<int>(psi.size());
    const int lo = N / 4;
    const int hi = (3 * N) / 4;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int count = 0;
    for (int n = lo; n <= hi; ++n) {
        const double a = std::abs(psi(n));
        if (!(a > 0.0))
            continue;
        const double y = std::log(a);
        sx += n;
        sy += y;
        sxx += static_cast<double>(n) * n;
        sxy += n * y;
        ++count;
    }
    if (count < 2)
        return 0.0;
    const double den = count * sxx - sx * sx;
    return den != 0.0 ? (count * sxy - sx * sy) / den : 0.0;
}

inline LocalizationProfile localization_direction(const ModeSolution& mode, double g) {
    LocalizationProfile out;
    out.thetaImagAbs = std::abs(mode.root.theta.imag());
    const double gap = std::abs(g) - out.thetaImagAbs;
    out.expectedSlope = (g >= 0.0 ? 1.0 : -1.0) * gap;
    out.fittedSlope = fitted_log_slope(mode.amplitudes);
    if (std::abs(gap) <= kFlatTolerance)
        out.direction = Direction::Flat;
    else
        out.direction = out.expectedSlope > 0.0 ? Direction::Left : Direction::Right;
    return out;
}

/// 2 sinh(N |g|)
inline double critical_v0_hn(int N, double g) { return 2.0 * std::sinh(N * std::abs(g)); }

/// 2 min(1, |t'|) sinh(N |g|)
inline double critical_v0_ssh(int N, double g, double tPrime) {
    if (tPrime == 0.0)
        throw Error(ErrorKind::InvalidParameter, "critical_v0_ssh: t' must be nonzero");
    return 2.0 * std::min(1.0, std::abs(tPrime)) * std::sinh(N * std::abs(g));
}

struct ExactCritical {
    double value = 0.0; ///< upper end of the final bracket (N-1 real roots there)
    double lower = 0.0; ///< largest probed V0 with fewer than N-1 real roots
    double upper = 0.0;
};

/// Smallest V0 for which the secular equation has N-1 real roots in (0, pi),
/// by bisection on [0, 2 sinh(N|g|)] to 1e-9 relative width.
inline ExactCritical exact_critical_v0(int N, double g) {
    if (g == 0.0)
        throw Error(ErrorKind::InvalidParameter, "exact_critical_v0: g must be nonzero");
    auto allReal = [&](double v) {
        return static_cast<int>(real_theta_bracketed_solve(HNParams{N, 1.0, g, v}).size()) == N - 1;
    };
    double hi = critical_v0_hn(N, g);
    if (!allReal(hi))
        throw Error(ErrorKind::NumericalFailure,
                    "exact_critical_v0: fewer than N-1 real roots at 2 sinh(N|g|)", hi);
    double lo = 0.0;
    while (hi - lo > 1e-9 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (allReal(mid))
            hi = mid;
        else
            lo = mid;
    }
    return {hi, lo, hi};
}

// ---------------------------------------------------------------------------
// Dense-oracle spectrum classification.

/// Oracle eigenvalues with the impurity level removed: for real V0 > 0 the
/// eigenvalue of largest real part, for real V0 < 0 the smallest. Nothing is
/// removed for V0 = 0 or complex V0.
inline std::vector<cplx> oracle_bulk_energies(const Model& m) {
    auto values = to_std(dense_eigensolve(build_matrix(m)).values);
    const cplx V0 = impurity(m);
    if (V0.imag() != 0.0 || V0.real() == 0.0 || values.empty())
        return values;
    auto byRe = [](cplx a, cplx b) { return a.real() < b.real(); };
    auto it = V0.real() > 0.0 ? std::max_element(values.begin(), values.end(), byRe)
                              : std::min_element(values.begin(), values.end(), byRe);
    values.erase(it);
    return values;
}

inline double oracle_max_bulk_imag(const Model& m) {
    double out = 0.0;
    for (const auto& e : oracle_bulk_energies(m))
        out = std::max(out, std::abs(e.imag()));
    return out;
}

inline bool oracle_fully_real(const Model& m, double tol = kRealnessTolerance) {
    return oracle_max_bulk_imag(m) <= tol;
}

/// True when some bulk energy is real and inside the band [-2, 2], i.e.
/// belongs to a real secular root.
inline bool oracle_has_real_band_energy(const HNParams& p, double tol = kRealnessTolerance) {
    for (const auto& e : oracle_bulk_energies(p))
        if (std::abs(e.imag()) <= tol && std::abs(e.real()) <= 2.0)
            return true;
    return false;
}

struct Bracket {
    double lower = 0.0; ///< predicate false
    double upper = 0.0; ///< predicate true
};

/// Geometric bisection for a predicate that switches from false to true
/// once on [lo, hi].
inline Bracket bisect_threshold(const std::function<bool(double)>& pred, double lo, double hi,
                                double relTol = 1e-6) {
    if (!(lo > 0.0) || !(hi > lo))
        throw Error(ErrorKind::InvalidInput, "bisect_threshold: need 0 < lo < hi");
    if (pred(lo) || !pred(hi))
        throw Error(ErrorKind::NumericalFailure, "bisect_threshold: predicate does not switch on the bracket", lo);
    while (hi / lo - 1.0 > relTol) {
        const double mid = std::sqrt(lo * hi);
        if (pred(mid))
            hi = mid;
        else
            lo = mid;
    }
    return {lo, hi};
}

inline Bracket oracle_full_realness_threshold(const Model& base, double lo, double hi, double relTol = 1e-6) {
    return bisect_threshold([&](double v) { return oracle_fully_real(with_impurity(base, v)); }, lo, hi, relTol);
}

inline Bracket oracle_partial_realness_onset(const HNParams& base, double lo, double hi, double relTol = 1e-6) {
    return bisect_threshold(
        [&](double v) {
            HNParams p = base;
            p.V0 = v;
            return oracle_has_real_band_energy(p);
        },
        lo, hi, relTol);
}

/// V0 beyond which no bulk mode decays to the right (all |Im theta| < |g|).
inline Bracket localization_flip_v0(const HNParams& base, double lo, double hi, double relTol = 1e-6) {
    return bisect_threshold(
        [&](double v) {
            HNParams p = base;
            p.V0 = v;
            for (const auto& r : solve_thetas(p).roots)
                if (r.kind != RootKind::Bound && std::abs(r.theta.imag()) > std::abs(p.g) + kFlatTolerance)
                    return false;
            return true;
        },
        lo, hi, relTol);
}

} // namespace nhi
