#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "nhi/error.hpp"
#include "nhi/model.hpp"

namespace nhi::poly {

/// Coefficients are stored lowest degree first: p(x) = sum_j c[j] x^j.
using Coefficients = std::vector<cplx>;

struct HornerResult {
    cplx value;
    cplx derivative;
};

inline HornerResult horner(std::span<const cplx> c, cplx x) {
    cplx p = 0.0;
    cplx dp = 0.0;
    for (std::size_t j = c.size(); j-- > 0;) {
        dp = dp * x + p;
        p = p * x + c[j];
    }
    return {p, dp};
}

/// Newton correction p(x)/p'(x). Outside the unit disk the reversed
/// polynomial is evaluated at 1/x so that powers of x never overflow.
inline cplx newton_ratio(std::span<const cplx> c, cplx x) {
    const auto degree = static_cast<double>(c.size() - 1);
    if (std::abs(x) <= 1.0) {
        const auto h = horner(c, x);
        return h.value / h.derivative;
    }
    const cplx y = 1.0 / x;
    cplx p = 0.0;
    cplx dp = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        dp = dp * y + p;
        p = p * y + c[j];
    }
    // p(x) = x^n q(y), p'(x) = x^{n-1} (n q(y) - y q'(y)), q = reversed p.
    return x * p / (degree * p - y * dp);
}

/// Parlett-Reinsch balancing by powers of two: A <- D^{-1} A D with the
/// diagonal of D returned. Eigenvalues are unchanged; eigenvectors map back
/// as v = D v'.
template <typename Matrix>
Eigen::VectorXd balance(Matrix& A) {
    const int n = static_cast<int>(A.rows());
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(n);
    constexpr double radix = 2.0;
    bool done = false;
    while (!done) {
        done = true;
        for (int i = 0; i < n; ++i) {
            double r = 0.0;
            double c = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i)
                    continue;
                c += std::abs(A(j, i));
                r += std::abs(A(i, j));
            }
            if (c == 0.0 || r == 0.0)
                continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                A.row(i) /= f;
                A.col(i) *= f;
                scale(i) *= f;
            }
        }
    }
    return scale;
}

/// Eigenvalues of an upper Hessenberg matrix by single-shift complex QR
/// with Wilkinson shifts and deflation. The matrix is overwritten.
inline std::vector<cplx> hessenberg_qr_eigenvalues(CMatrix H, int maxSweepsPerEigenvalue = 60) {
    const int n = static_cast<int>(H.rows());
    std::vector<cplx> eig(n);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double norm = std::max(H.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

    struct Rotation {
        double c;
        cplx s;
    };
    std::vector<Rotation> rotations(n);

    int hi = n - 1;
    int iter = 0;
    int totalIter = 0;
    while (hi >= 0) {
        int lo = hi;
        while (lo > 0) {
            double s = std::abs(H(lo - 1, lo - 1)) + std::abs(H(lo, lo));
            if (s == 0.0)
                s = norm;
            if (std::abs(H(lo, lo - 1)) <= eps * s) {
                H(lo, lo - 1) = 0.0;
                break;
            }
            --lo;
        }
        if (lo == hi) {
            eig[hi] = H(hi, hi);
            --hi;
            iter = 0;
            continue;
        }
        ++iter;
        ++totalIter;
        if (totalIter > maxSweepsPerEigenvalue * n)
            throw Error(ErrorKind::NumericalFailure, "Hessenberg QR did not converge", totalIter);

        cplx shift;
        if (iter % 11 == 10) {
            // exceptional shift
            shift = H(hi, hi) + std::abs(H(hi, hi - 1)) + (hi >= 2 ? std::abs(H(hi - 1, hi - 2)) : 0.0);
        } else {
            const cplx a = H(hi - 1, hi - 1);
            const cplx b = H(hi - 1, hi);
            const cplx c = H(hi, hi - 1);
            const cplx d = H(hi, hi);
            const cplx half = 0.5 * (a - d);
            const cplx disc = std::sqrt(half * half + b * c);
            const cplx mu1 = 0.5 * (a + d) + disc;
            const cplx mu2 = 0.5 * (a + d) - disc;
            shift = std::abs(mu1 - d) < std::abs(mu2 - d) ? mu1 : mu2;
        }

        for (int k = lo; k <= hi; ++k)
            H(k, k) -= shift;
        for (int k = lo; k < hi; ++k) {
            const cplx x = H(k, k);
            const cplx y = H(k + 1, k);
            const double r = std::hypot(std::abs(x), std::abs(y));
            Rotation rot;
            if (r == 0.0) {
                rot = {1.0, 0.0};
            } else if (std::abs(x) == 0.0) {
                rot = {0.0, 1.0};
            } else {
                rot.c = std::abs(x) / r;
                rot.s = (x / std::abs(x)) * std::conj(y) / r;
            }
            rotations[k] = rot;
            for (int j = k; j <= hi; ++j) {
                const cplx u = H(k, j);
                const cplx v = H(k + 1, j);
                H(k, j) = rot.c * u + rot.s * v;
                H(k + 1, j) = -std::conj(rot.s) * u + rot.c * v;
            }
        }
        for (int k = lo; k < hi; ++k) {
            const auto& rot = rotations[k];
            const int rowEnd = std::min(k + 2, hi);
            for (int i = lo; i <= rowEnd; ++i) {
                const cplx u = H(i, k);
                const cplx v = H(i, k + 1);
                H(i, k) = u * rot.c + v * std::conj(rot.s);
                H(i, k + 1) = -u * rot.s + v * rot.c;
            }
        }
        for (int k = lo; k <= hi; ++k)
            H(k, k) += shift;
    }
    return eig;
}

/// Roots as eigenvalues of the balanced companion matrix.
inline std::vector<cplx> companion_roots(std::span<const cplx> c) {
    int degree = static_cast<int>(c.size()) - 1;
    while (degree > 0 && c[degree] == 0.0)
        --degree;
    if (degree < 1)
        throw Error(ErrorKind::InvalidInput, "companion_roots: polynomial has no roots");
    if (degree == 1)
        return {-c[0] / c[1]};
    CMatrix C = CMatrix::Zero(degree, degree);
    for (int j = 0; j < degree; ++j)
        C(0, j) = -c[degree - 1 - j] / c[degree];
    for (int i = 1; i < degree; ++i)
        C(i, i - 1) = 1.0;
    balance(C);
    return hessenberg_qr_eigenvalues(std::move(C));
}

/// Initial root guesses on circles whose radii come from the upper convex
/// hull of (j, log|c_j|). Works for coefficients spanning many decades.
inline std::vector<cplx> newton_polygon_guesses(std::span<const cplx> c) {
    const int n = static_cast<int>(c.size()) - 1;
    std::vector<int> hull;
    std::vector<double> logc(n + 1);
    for (int j = 0; j <= n; ++j)
        logc[j] = std::abs(c[j]) > 0.0 ? std::log(std::abs(c[j])) : -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= n; ++j) {
        if (!std::isfinite(logc[j]))
            continue;
        while (hull.size() >= 2) {
            const int a = hull[hull.size() - 2];
            const int b = hull.back();
            // drop b if it lies on or below the chord a -> j
            if ((logc[b] - logc[a]) * (j - a) <= (logc[j] - logc[a]) * (b - a))
                hull.pop_back();
            else
                break;
        }
        hull.push_back(j);
    }
    std::vector<cplx> guesses;
    guesses.reserve(n);
    // Zero roots for vanishing low-order coefficients.
    for (int j = 0; j < hull.front(); ++j)
        guesses.emplace_back(0.0, 0.0);
    for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
        const int a = hull[h];
        const int b = hull[h + 1];
        const int count = b - a;
        const double radius = std::exp((logc[a] - logc[b]) / count);
        for (int k = 0; k < count; ++k) {
            const double angle = 2.0 * kPi * (k + 0.25) / count + 0.4 + 0.1 * h;
            guesses.push_back(std::polar(radius, angle));
        }
    }
    return guesses;
}

struct AberthReport {
    std::vector<cplx> roots;
    int iterations = 0;
    bool converged = false;
};

/// Simultaneous Aberth-Ehrlich refinement of all roots from the given
/// starting points.
inline AberthReport aberth(std::span<const cplx> c, std::vector<cplx> z, int maxIter = 500) {
    const int n = static_cast<int>(z.size());
    std::vector<bool> frozen(n, false);
    AberthReport report;
    for (int it = 0; it < maxIter; ++it) {
        int active = 0;
        for (int k = 0; k < n; ++k) {
            if (frozen[k])
                continue;
            const cplx ratio = newton_ratio(c, z[k]);
            if (!std::isfinite(ratio.real()) || !std::isfinite(ratio.imag())) {
                frozen[k] = true;
                continue;
            }
            cplx repulsion = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != k)
                    repulsion += 1.0 / (z[k] - z[j]);
            const cplx step = ratio / (1.0 - ratio * repulsion);
            z[k] -= step;
            if (std::abs(step) <= 1e-14 * std::max(std::abs(z[k]), 1e-300))
                frozen[k] = true;
            else
                ++active;
        }
        report.iterations = it + 1;
        if (active == 0) {
            report.converged = true;
            break;
        }
    }
    report.roots = std::move(z);
    return report;
}

} // namespace nhi::poly
