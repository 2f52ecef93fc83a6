#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "nhi/error.hpp"
#include "nhi/model.hpp"
#include "nhi/polynomial.hpp"

namespace nhi {

enum class RootKind { Bulk, Bound, Nonphysical };

inline const char* to_string(RootKind k) {
    switch (k) {
    case RootKind::Bulk: return "bulk";
    case RootKind::Bound: return "bound";
    case RootKind::Nonphysical: return "nonphysical";
    }
    return "unknown";
}

/// One root of the secular equation in canonical form: Im(theta) >= 0,
/// and Re(theta) in (0, pi) when theta is real. beta = e^{i theta}.
struct ThetaRoot {
    cplx theta;
    cplx beta;
    double residual = 0.0; ///< |F(theta)| relative to the magnitude of its terms
    RootKind kind = RootKind::Bulk;
};

struct ModeSolution {
    ThetaRoot root;
    cplx energy;
    cplx alpha1; ///< coefficient of z1^n, z1 = e^{g + i theta}
    cplx alpha2; ///< coefficient of z2^n, z2 = e^{g - i theta}
    CVector amplitudes;
    double matrixResidual = 0.0; ///< ||(H - E) psi|| / ||H||_F
};

/// Classification threshold on |Im theta| for a real root.
inline double real_tolerance(double g) { return 1e-8 * std::max(1.0, std::abs(g)); }

inline cplx theta_to_energy(cplx theta) { return 2.0 * std::cos(theta); }

namespace detail {

/// F(theta) = sin(theta)(2cos(N theta) - 2cosh(N g)) - V sin(N theta) and its
/// derivative, both multiplied by exp(-logFactor) so that nothing overflows.
struct ScaledSecular {
    cplx value;
    cplx derivative;
    double magnitude; ///< scaled sum of term magnitudes
    double logFactor;
    cplx cosN;        ///< cos(N theta), scaled
    cplx sinN;        ///< sin(N theta), scaled
};

inline ScaledSecular scaled_secular(int N, double g, cplx V, cplx theta) {
    const double a = theta.real();
    const double b = theta.imag();
    const double L = N * std::max(std::abs(b), std::abs(g));
    const cplx ePlus = std::exp(cplx(-N * b - L, N * a));
    const cplx eMinus = std::exp(cplx(N * b - L, -N * a));
    const cplx cosN = 0.5 * (ePlus + eMinus);
    const cplx sinN = (ePlus - eMinus) / cplx(0.0, 2.0);
    const double coshNg = 0.5 * (std::exp(N * std::abs(g) - L) + std::exp(-N * std::abs(g) - L));
    const cplx s = std::sin(theta);
    const cplx c = std::cos(theta);
    const cplx bracket = 2.0 * cosN - 2.0 * coshNg;
    ScaledSecular out;
    out.value = s * bracket - V * sinN;
    out.derivative = c * bracket - 2.0 * N * s * sinN - V * static_cast<double>(N) * cosN;
    out.magnitude = std::abs(s) * (2.0 * std::abs(cosN) + 2.0 * coshNg) + std::abs(V) * std::abs(sinN);
    out.logFactor = L;
    out.cosN = cosN;
    out.sinN = sinN;
    return out;
}

inline double relative_residual(const ScaledSecular& s) {
    return s.magnitude > 0.0 ? std::abs(s.value) / s.magnitude : 0.0;
}

inline double wrap_pi(double x) {
    x = std::remainder(x, 2.0 * kPi);
    if (x <= -kPi)
        x += 2.0 * kPi;
    return x;
}

/// theta and -theta (and theta + 2 pi k) describe the same eigenmode.
inline cplx canonical_theta(cplx theta, double tol) {
    theta = cplx(wrap_pi(theta.real()), theta.imag());
    if (theta.imag() < 0.0)
        theta = cplx(wrap_pi(-theta.real()), -theta.imag());
    if (std::abs(theta.imag()) <= tol && theta.real() < 0.0)
        theta = -theta;
    return theta;
}

inline double theta_distance(cplx a, cplx b) {
    return std::abs(cplx(wrap_pi(a.real() - b.real()), a.imag() - b.imag()));
}

/// Newton iterations on F; steps are capped so a polish cannot hop roots.
inline cplx newton_polish(int N, double g, cplx V, cplx theta, int maxIter = 12) {
    auto current = scaled_secular(N, g, V, theta);
    for (int it = 0; it < maxIter; ++it) {
        if (current.derivative == 0.0)
            break;
        const cplx step = current.value / current.derivative;
        if (!std::isfinite(step.real()) || !std::isfinite(step.imag()) || std::abs(step) > 0.05)
            break;
        const cplx candidate = theta - step;
        const auto next = scaled_secular(N, g, V, candidate);
        if (relative_residual(next) > relative_residual(current) && relative_residual(current) < 1e-12)
            break;
        theta = candidate;
        current = next;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(theta)))
            break;
    }
    return theta;
}

/// Newton restricted to a line theta = origin + direction * s (s real).
/// Used to pin roots onto the real axis or onto Re(theta) in {0, pi}.
inline cplx axis_polish(int N, double g, cplx V, cplx theta, cplx origin, cplx direction) {
    double s = std::real((theta - origin) / direction);
    for (int it = 0; it < 30; ++it) {
        const auto sv = scaled_secular(N, g, V, origin + direction * s);
        if (sv.derivative == 0.0)
            break;
        const double step = std::real(sv.value / (sv.derivative * direction));
        if (!std::isfinite(step) || std::abs(step) > 0.05)
            break;
        s -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(s)))
            break;
    }
    return origin + direction * s;
}

inline RootKind classify_root(cplx theta, cplx V, double tol) {
    if (std::abs(theta) <= tol || std::abs(theta - kPi) <= tol)
        return RootKind::Nonphysical;
    if (V.imag() == 0.0 && V.real() != 0.0 && theta.imag() > tol) {
        if (V.real() > 0.0 && std::abs(theta.real()) <= tol)
            return RootKind::Bound;
        if (V.real() < 0.0 && std::abs(std::abs(theta.real()) - kPi) <= tol)
            return RootKind::Bound;
    }
    return RootKind::Bulk;
}

/// Polish a canonical root and pin it to a symmetry axis when the impurity
/// is real and the root lies within tolerance of one.
inline ThetaRoot finalize_root(int N, double g, cplx V, cplx theta) {
    const double tol = real_tolerance(g);
    theta = canonical_theta(newton_polish(N, g, V, theta), tol);
    double residual = relative_residual(scaled_secular(N, g, V, theta));

    if (V.imag() == 0.0) {
        auto tryAxis = [&](cplx origin, cplx direction) {
            const cplx pinned = axis_polish(N, g, V, theta, origin, direction);
            const double r = relative_residual(scaled_secular(N, g, V, pinned));
            if (r <= std::max(10.0 * residual, 1e-12) && std::abs(pinned - theta) <= 1e3 * tol) {
                theta = pinned;
                residual = r;
            }
        };
        if (std::abs(theta.imag()) <= tol)
            tryAxis(cplx(0.0, 0.0), cplx(1.0, 0.0));
        else if (std::abs(theta.real()) <= tol)
            tryAxis(cplx(0.0, 0.0), cplx(0.0, 1.0));
        else if (std::abs(std::abs(theta.real()) - kPi) <= tol)
            tryAxis(cplx(kPi, 0.0), cplx(0.0, 1.0));
        theta = canonical_theta(theta, tol);
    }
    ThetaRoot root;
    root.theta = theta;
    root.beta = std::exp(cplx(0.0, 1.0) * theta);
    root.residual = residual;
    root.kind = classify_root(theta, V, tol);
    return root;
}

/// Group 2N polynomial roots into N reciprocal pairs (beta, 1/beta) by
/// greedy nearest matching of canonical theta values.
inline std::vector<cplx> pair_reciprocal_roots(const std::vector<cplx>& betas, double tol, double& worstDistance) {
    const int m = static_cast<int>(betas.size());
    std::vector<cplx> keys(m);
    for (int i = 0; i < m; ++i)
        keys[i] = canonical_theta(cplx(0.0, -1.0) * std::log(betas[i]), tol);
    struct Candidate {
        double d;
        int i;
        int j;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(m * (m - 1) / 2);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            candidates.push_back({theta_distance(keys[i], keys[j]), i, j});
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return a.d < b.d || (a.d == b.d && (a.i < b.i || (a.i == b.i && a.j < b.j)));
    });
    std::vector<bool> used(m, false);
    std::vector<cplx> representatives;
    worstDistance = 0.0;
    for (const auto& c : candidates) {
        if (used[c.i] || used[c.j])
            continue;
        used[c.i] = used[c.j] = true;
        worstDistance = std::max(worstDistance, c.d / std::max(1.0, std::abs(keys[c.i])));
        // The member closer to the unit circle carries less rounding.
        const bool firstBetter = std::abs(std::log(std::abs(betas[c.i]))) <= std::abs(std::log(std::abs(betas[c.j])));
        const cplx a = keys[c.i];
        const cplx b = keys[c.j];
        representatives.push_back(firstBetter ? a : b);
    }
    return representatives;
}

} // namespace detail

/// F(theta) = sin(theta)(2cos(N theta) - 2cosh(N g)) - V0 sin(N theta).
/// The raw value grows like e^{N |Im theta|}; it may overflow to inf where
/// the scaled form used internally does not.
inline cplx evaluate_secular(const HNParams& p, cplx theta) {
    const auto s = detail::scaled_secular(p.N, p.g, p.V0, theta);
    return s.value * std::exp(s.logFactor);
}

/// |F(theta)| divided by the summed magnitude of its terms.
inline double secular_residual(const HNParams& p, cplx theta) {
    return detail::relative_residual(detail::scaled_secular(p.N, p.g, p.V0, theta));
}

/// Degree-2N polynomial in beta = e^{i theta} whose roots are the secular
/// roots: beta^{2N} + 1 - 2cosh(N g) beta^N - V0 (beta + beta^3 + ... + beta^{2N-1}).
/// It equals 2i beta^{N+1} F / (beta^2 - 1), i.e. the trivial roots beta = +-1
/// are divided out, and it is self-reciprocal: c_j = c_{2N-j}.
inline poly::Coefficients characteristic_polynomial(const HNParams& p) {
    validate(p);
    const int N = p.N;
    poly::Coefficients c(2 * N + 1, 0.0);
    c[0] += 1.0;
    c[2 * N] += 1.0;
    c[N] -= 2.0 * std::cosh(N * p.g);
    for (int j = 0; j < N; ++j)
        c[2 * j + 1] -= p.V0;
    return c;
}

enum class RootMethod { Companion, NewtonPolygon };

struct ThetaSolution {
    std::vector<ThetaRoot> roots;
    RootMethod method = RootMethod::Companion;
    double pairingDefect = 0.0;
    std::vector<std::string> warnings;
};

namespace detail {

inline ThetaSolution solve_thetas_with(const HNParams& p, const poly::Coefficients& coeffs, RootMethod method) {
    std::vector<cplx> start = method == RootMethod::Companion ? poly::companion_roots(coeffs)
                                                               : poly::newton_polygon_guesses(coeffs);
    auto refined = poly::aberth(coeffs, std::move(start));
    ThetaSolution out;
    out.method = method;
    const double tol = real_tolerance(p.g);
    const auto reps = pair_reciprocal_roots(refined.roots, tol, out.pairingDefect);
    out.roots.reserve(reps.size());
    for (const cplx& theta : reps)
        out.roots.push_back(finalize_root(p.N, p.g, p.V0, theta));
    std::sort(out.roots.begin(), out.roots.end(), [](const ThetaRoot& a, const ThetaRoot& b) {
        return a.theta.real() < b.theta.real() || (a.theta.real() == b.theta.real() && a.theta.imag() < b.theta.imag());
    });
    return out;
}

} // namespace detail

/// All N independent secular roots. Companion-matrix starting values for
/// N|g| <= 30, Newton-polygon circles beyond, Aberth refinement and a
/// Newton polish on F in both cases.
inline ThetaSolution solve_thetas(const HNParams& p) {
    validate(p);
    auto coeffs = characteristic_polynomial(p);
    double cmax = 0.0;
    for (const auto& v : coeffs)
        cmax = std::max(cmax, std::abs(v));
    for (auto& v : coeffs)
        v /= cmax;

    constexpr double kPairingTolerance = 1e-5;
    constexpr double kResidualTolerance = 1e-8;
    auto acceptable = [&](const ThetaSolution& s) {
        if (static_cast<int>(s.roots.size()) != p.N || s.pairingDefect > kPairingTolerance)
            return false;
        return std::all_of(s.roots.begin(), s.roots.end(),
                           [&](const ThetaRoot& r) { return r.residual <= kResidualTolerance; });
    };

    const bool overflowRegime = p.N * std::abs(p.g) > 30.0;
    ThetaSolution best;
    bool have = false;
    for (RootMethod method : {RootMethod::Companion, RootMethod::NewtonPolygon}) {
        if (method == RootMethod::Companion && overflowRegime)
            continue;
        ThetaSolution attempt;
        try {
            attempt = detail::solve_thetas_with(p, coeffs, method);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NumericalFailure)
                throw;
            continue;
        }
        if (acceptable(attempt)) {
            best = std::move(attempt);
            have = true;
            break;
        }
        if (!have || attempt.pairingDefect < best.pairingDefect) {
            best = std::move(attempt);
            have = true;
        }
    }
    if (!have || best.pairingDefect > kPairingTolerance)
        throw Error(ErrorKind::NumericalFailure,
                    "solve_thetas: no reciprocal partner within tolerance (worst pairing defect " +
                        std::to_string(have ? best.pairingDefect : -1.0) + ")",
                    have ? best.pairingDefect : -1.0);
    for (const auto& r : best.roots)
        if (r.residual > kResidualTolerance)
            throw Error(ErrorKind::NumericalFailure,
                        "solve_thetas: root residual " + std::to_string(r.residual) + " above 1e-8", r.residual);

    if (p.V0.imag() == 0.0 && p.V0.real() != 0.0) {
        const auto bound = std::count_if(best.roots.begin(), best.roots.end(),
                                         [](const ThetaRoot& r) { return r.kind == RootKind::Bound; });
        if (bound != 1)
            best.warnings.push_back("expected exactly one bound root, found " + std::to_string(bound));
    }
    return best;
}

namespace detail {

/// Eigenvector of the HN ring (impurity V, possibly complex) at energy
/// 2cos(theta), built from psi_n = a1 z1^n + a2 z2^n with the boundary
/// rows fixing (a1, a2) as the null vector of the 2x2 boundary matrix.
inline ModeSolution reconstruct_hn_mode(int N, double g, cplx V, const ThetaRoot& root) {
    const cplx theta = root.theta;
    const cplx eps = theta_to_energy(theta);
    const double eg = std::exp(g);
    const double emg = std::exp(-g);
    const bool degenerate = std::abs(std::sin(theta)) < 1e-6;

    // Each basis function is stored as coefficient * exp(exponent).
    struct Basis {
        std::vector<cplx> mantissa;
        std::vector<double> logMag;
    };
    std::array<Basis, 2> basis;
    for (auto& b : basis) {
        b.mantissa.resize(N);
        b.logMag.resize(N);
    }
    std::array<cplx, 2> w{cplx(g, 0.0) + cplx(0.0, 1.0) * theta, cplx(g, 0.0) - cplx(0.0, 1.0) * theta};
    if (!degenerate) {
        for (int j = 0; j < 2; ++j)
            for (int n = 0; n < N; ++n) {
                basis[j].logMag[n] = n * w[j].real();
                basis[j].mantissa[n] = std::exp(cplx(0.0, n * w[j].imag()));
            }
    } else {
        // e^{gn} cos(n theta) and e^{gn} U_{n-1}(cos theta); regular at theta = 0, pi.
        const cplx ct = std::cos(theta);
        cplx uPrev = 0.0;
        cplx uCur = 1.0;
        for (int n = 0; n < N; ++n) {
            basis[0].mantissa[n] = std::cos(static_cast<double>(n) * theta);
            basis[1].mantissa[n] = n == 0 ? cplx(0.0) : uCur;
            if (n >= 1) {
                const cplx uNext = 2.0 * ct * uCur - uPrev;
                uPrev = uCur;
                uCur = uNext;
            }
            basis[0].logMag[n] = basis[1].logMag[n] = g * n;
        }
    }

    std::array<double, 2> colScale{};
    for (int j = 0; j < 2; ++j)
        colScale[j] = *std::max_element(basis[j].logMag.begin(), basis[j].logMag.end());
    auto phi = [&](int j, int n) { return basis[j].mantissa[n] * std::exp(basis[j].logMag[n] - colScale[j]); };

    // Boundary rows 0 and N-1 applied to each basis function. For the
    // exponential basis they reduce to A(z) = V + e^g (z^{N-1} - z^{-1}) and
    // B(z) = e^{-g} (1 - z^N); `mag` holds the summed term sizes so the
    // rounding error of each row can be estimated.
    Eigen::Matrix2cd M;
    Eigen::Matrix2d mag;
    for (int j = 0; j < 2; ++j) {
        if (!degenerate) {
            auto term = [&](int n) { return std::exp(static_cast<double>(n) * w[j] - colScale[j]); };
            const cplx zLast = term(N - 1);
            const cplx zInv = term(-1);
            const cplx zN = term(N);
            const cplx one = term(0);
            M(0, j) = V * one + eg * (zLast - zInv);
            M(1, j) = emg * (one - zN);
            mag(0, j) = std::abs(V * one) + eg * (std::abs(zLast) + std::abs(zInv));
            mag(1, j) = emg * (std::abs(one) + std::abs(zN));
        } else {
            M(0, j) = eg * phi(j, N - 1) + (V - eps) * phi(j, 0) + emg * phi(j, 1);
            M(1, j) = eg * phi(j, N - 2) + emg * phi(j, 0) - eps * phi(j, N - 1);
            mag(0, j) = eg * std::abs(phi(j, N - 1)) + (std::abs(V) + std::abs(eps)) * std::abs(phi(j, 0)) +
                        emg * std::abs(phi(j, 1));
            mag(1, j) = eg * std::abs(phi(j, N - 2)) + emg * std::abs(phi(j, 0)) + std::abs(eps) * std::abs(phi(j, N - 1));
        }
    }
    // On a root both rows are proportional; take the null vector from the row
    // with the smaller relative rounding error, SVD when both rows vanish.
    std::array<double, 2> rowError{};
    for (int r = 0; r < 2; ++r) {
        const double size = M.row(r).cwiseAbs().maxCoeff();
        rowError[r] = size > 0.0 ? mag.row(r).maxCoeff() / size : std::numeric_limits<double>::infinity();
    }
    Eigen::Vector2cd a;
    const int r = rowError[0] <= rowError[1] ? 0 : 1;
    if (std::isfinite(rowError[r]) && rowError[r] < 1e8) {
        a << M(r, 1), -M(r, 0);
        a.normalize();
    } else {
        for (int k = 0; k < 2; ++k) {
            const double rn = M.row(k).norm();
            if (rn > 0.0)
                M.row(k) /= rn;
        }
        if (M.norm() == 0.0) {
            a << 1.0, 0.0;
        } else {
            Eigen::JacobiSVD<Eigen::Matrix2cd> svd(M, Eigen::ComputeFullV);
            a = svd.matrixV().col(1);
        }
    }

    // psi_n = sum_j a_j phi_j(n) e^{logMag - colScale}; shift by the global max.
    double top = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < 2; ++j)
        for (int n = 0; n < N; ++n)
            if (std::abs(a(j)) > 0.0)
                top = std::max(top, basis[j].logMag[n] - colScale[j] + std::log(std::abs(a(j))));
    CVector psi(N);
    for (int n = 0; n < N; ++n) {
        cplx v = 0.0;
        for (int j = 0; j < 2; ++j)
            if (std::abs(a(j)) > 0.0)
                v += a(j) * basis[j].mantissa[n] * std::exp(basis[j].logMag[n] - colScale[j] - top);
        psi(n) = v;
    }
    const double norm = psi.norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw Error(ErrorKind::NumericalFailure, "reconstruct_eigenstate: vanishing amplitude vector");
    psi /= norm;

    ModeSolution mode;
    mode.root = root;
    mode.energy = eps;
    mode.amplitudes = psi;
    if (!degenerate) {
        mode.alpha1 = a(0) * std::exp(-colScale[0] - top) / norm;
        mode.alpha2 = a(1) * std::exp(-colScale[1] - top) / norm;
    } else {
        // Degenerate basis: report the cos / U coefficients.
        mode.alpha1 = a(0) * std::exp(-colScale[0] - top) / norm;
        mode.alpha2 = a(1) * std::exp(-colScale[1] - top) / norm;
    }
    return mode;
}

inline double matrix_residual(const CMatrix& H, cplx energy, const CVector& psi) {
    const CVector r = H * psi - energy * psi;
    return r.norm() / H.norm();
}

} // namespace detail

/// Eigenvector for one secular root, unit Euclidean norm.
inline ModeSolution reconstruct_eigenstate(const HNParams& p, const ThetaRoot& root) {
    validate(p);
    if (root.kind == RootKind::Nonphysical)
        throw Error(ErrorKind::InvalidInput, "reconstruct_eigenstate: root at theta = 0 or pi is non-physical");
    auto mode = detail::reconstruct_hn_mode(p.N, p.g, p.V0, root);
    mode.matrixResidual = detail::matrix_residual(build_hn_matrix(p).entries, mode.energy, mode.amplitudes);
    return mode;
}

struct HNSolution {
    std::vector<ModeSolution> modes;
    std::vector<std::string> warnings;
    RootMethod method = RootMethod::Companion;
};

/// Full exact eigensystem of the HN impurity ring.
inline HNSolution solve_hn(const HNParams& p) {
    auto thetas = solve_thetas(p);
    const CMatrix H = build_hn_matrix(p).entries;
    HNSolution out;
    out.warnings = std::move(thetas.warnings);
    out.method = thetas.method;
    out.modes.reserve(thetas.roots.size());
    for (const auto& root : thetas.roots) {
        auto mode = detail::reconstruct_hn_mode(p.N, p.g, p.V0, root);
        mode.matrixResidual = detail::matrix_residual(H, mode.energy, mode.amplitudes);
        if (mode.matrixResidual > 1e-8)
            throw Error(ErrorKind::NumericalFailure,
                        "solve_hn: eigenvector residual " + std::to_string(mode.matrixResidual) + " above 1e-8",
                        mode.matrixResidual);
        out.modes.push_back(std::move(mode));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Real roots by bracketing: f1(theta) = f2(theta) on (0, pi).

/// (2cos(N theta) - 2cosh(N g)) / sin(N theta)
inline double f1(double theta, int N, double g) {
    const double s = std::sin(N * theta);
    if (s == 0.0 || std::abs(s) < 1e-300)
        throw Error(ErrorKind::Pole, "f1: sin(N theta) vanishes", theta);
    const double C = std::cosh(N * g);
    return C * (2.0 * std::cos(N * theta) / C - 2.0) / s;
}

inline double f2(double theta, double V0) {
    const double s = std::sin(theta);
    if (s == 0.0)
        throw Error(ErrorKind::Pole, "f2: sin(theta) vanishes", theta);
    return V0 / s;
}

namespace detail {

template <typename F>
double bisect(F&& h, double a, double b, double ha) {
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b)
            break;
        const double hm = h(m);
        if (hm == 0.0)
            return m;
        if ((hm > 0.0) == (ha > 0.0)) {
            a = m;
            ha = hm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

template <typename F>
double golden_max(F&& q, double a, double b) {
    constexpr double invPhi = 0.6180339887498949;
    double x1 = b - invPhi * (b - a);
    double x2 = a + invPhi * (b - a);
    double q1 = q(x1);
    double q2 = q(x2);
    for (int it = 0; it < 120 && (b - a) > 1e-15 * std::max(1.0, b); ++it) {
        if (q1 < q2) {
            a = x1;
            x1 = x2;
            q1 = q2;
            x2 = a + invPhi * (b - a);
            q2 = q(x2);
        } else {
            b = x2;
            x2 = x1;
            q2 = q1;
            x1 = b - invPhi * (b - a);
            q1 = q(x1);
        }
    }
    return q1 > q2 ? x1 : x2;
}

} // namespace detail

/// Real roots theta in (0, pi) of the secular equation for real V0 > 0,
/// found by bisection inside ((2n+1)pi/N, (2n+2)pi/N) where f1 > 0. The
/// function is evaluated divided by cosh(N g), so large N g is safe.
inline std::vector<double> real_theta_bracketed_solve(const HNParams& p) {
    validate(p);
    if (p.V0.imag() != 0.0 || !(p.V0.real() > 0.0))
        throw Error(ErrorKind::InvalidParameter, "real_theta_bracketed_solve: V0 must be real and positive");
    const int N = p.N;
    const double V0 = p.V0.real();
    const double G = std::abs(p.g);
    std::vector<double> roots;

    if (G == 0.0) {
        // F = -2 sin(N theta/2) [2 sin(theta) sin(N theta/2) + V0 cos(N theta/2)]
        for (int m = 1; 2 * m < N; ++m)
            roots.push_back(2.0 * m * kPi / N);
        auto k = [&](double th) { return 2.0 * std::sin(th) * std::sin(0.5 * N * th) + V0 * std::cos(0.5 * N * th); };
        for (int n = 0; 2 * n + 2 <= N; ++n) {
            const double a = (2.0 * n + 1.0) * kPi / N;
            const double b = std::min((2.0 * n + 2.0) * kPi / N, kPi);
            const double ka = k(a);
            const double kb = k(b);
            if ((ka > 0.0) != (kb > 0.0))
                roots.push_back(detail::bisect(k, a, b, ka));
        }
        std::sort(roots.begin(), roots.end());
        return roots;
    }

    const double NG = N * G;
    const double sech = 2.0 * std::exp(-NG) / (1.0 + std::exp(-2.0 * NG));
    const double v = V0 * sech;
    auto h = [&](double th) { return std::sin(th) * (2.0 * std::cos(N * th) * sech - 2.0) - v * std::sin(N * th); };
    // (f2 - f1) / cosh(N g), positive where the curves have crossed
    auto q = [&](double th) { return h(th) / (std::sin(th) * std::abs(std::sin(N * th))); };

    for (int n = 0; 2 * n + 2 <= N; ++n) {
        const double a = (2.0 * n + 1.0) * kPi / N;
        const double bRaw = (2.0 * n + 2.0) * kPi / N;
        const bool last = bRaw >= kPi * (1.0 - 1e-15);
        const double b = last ? kPi : bRaw;
        constexpr int K = 48;
        std::vector<double> pts;
        pts.push_back(a);
        for (int k = 1; k < K; ++k)
            pts.push_back(a + (b - a) * k / K);
        if (last) {
            for (int e = 6; e <= 40; e += 2)
                pts.push_back(b - (b - a) * std::ldexp(1.0, -e));
        } else {
            pts.push_back(b);
        }
        std::sort(pts.begin(), pts.end());
        // Locate the interior maximum of f2 - f1 so tangential pairs separate.
        std::size_t best = 1;
        for (std::size_t i = 1; i + 1 < pts.size(); ++i)
            if (q(pts[i]) > q(pts[best]))
                best = i;
        const double lo = pts[best - 1];
        const double hi = pts[std::min(best + 1, pts.size() - 1)];
        pts.push_back(detail::golden_max(q, lo, hi));
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

        std::vector<double> hv(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            hv[i] = h(pts[i]);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (hv[i] == 0.0 && i > 0) {
                roots.push_back(pts[i]);
                continue;
            }
            if (hv[i] != 0.0 && hv[i + 1] != 0.0 && (hv[i] > 0.0) != (hv[i + 1] > 0.0))
                roots.push_back(detail::bisect(h, pts[i], pts[i + 1], hv[i]));
        }
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

} // namespace nhi
