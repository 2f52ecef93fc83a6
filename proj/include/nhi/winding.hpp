#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nhi/characteristic.hpp"
#include "nhi/error.hpp"
#include "nhi/model.hpp"
#include "nhi/oracle.hpp"
#include "nhi/parallel.hpp"

namespace nhi {

struct WindingResult {
    cplx Er;
    int winding = 0;
    int nKUsed = 0;
    double rawWinding = 0.0; ///< accumulated phase / 2 pi before rounding
};

namespace detail {

/// det(H(k) - Er) for the Bloch Hamiltonian of either model.
inline cplx bloch_determinant(const Model& m, double k, cplx Er) {
    return std::visit(
        [&](const auto& p) -> cplx {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HNParams>) {
                return hn_dispersion(p, k) - Er;
            } else {
                const cplx offUpper = std::exp(-p.g) + p.tPrime * std::exp(cplx(0.0, -k));
                const cplx offLower = std::exp(p.g) + p.tPrime * std::exp(cplx(0.0, k));
                return Er * Er - offUpper * offLower;
            }
        },
        m);
}

inline double distance_to_pbc_spectrum(const Model& m, double k, cplx Er) {
    return std::visit(
        [&](const auto& p) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HNParams>)
                return std::abs(hn_dispersion(p, k) - Er);
            else
                return std::min(std::abs(ssh_dispersion(p, k, 1) - Er), std::abs(ssh_dispersion(p, k, -1) - Er));
        },
        m);
}

} // namespace detail

/// Winding of det(H(k) - Er) around zero as k runs over [0, 2 pi), counted
/// positive when the PBC band encircles Er clockwise (the orientation of
/// the HN ellipse for g > 0). The k grid doubles until the phase sum is
/// within 1e-6 of an integer.
inline WindingResult pbc_winding(const Model& m, cplx Er, int nK = 256) {
    validate(m);
    if (nK < 8)
        throw Error(ErrorKind::InvalidInput, "pbc_winding: need at least 8 k points");
    constexpr double kOnSpectrum = 1e-6;
    constexpr int kMaxK = 1 << 22;
    for (int n = nK; n <= kMaxK; n *= 2) {
        double phase = 0.0;
        double closest = std::numeric_limits<double>::infinity();
        cplx prev = detail::bloch_determinant(m, 0.0, Er);
        for (int j = 1; j <= n; ++j) {
            const double k = 2.0 * kPi * j / n;
            closest = std::min(closest, detail::distance_to_pbc_spectrum(m, k, Er));
            const cplx cur = detail::bloch_determinant(m, k, Er);
            phase += std::arg(cur / prev);
            prev = cur;
        }
        if (closest <= kOnSpectrum)
            throw Error(ErrorKind::OnSpectrum, "pbc_winding: Er lies on the PBC spectrum", closest);
        const double raw = -phase / (2.0 * kPi);
        const double rounded = std::round(raw);
        if (std::abs(raw - rounded) <= 1e-6)
            return {Er, static_cast<int>(rounded), n, raw};
    }
    throw Error(ErrorKind::NumericalFailure, "pbc_winding: phase sum did not converge to an integer");
}

/// Which Green's-function element the response uses.
enum class ResponseElement {
    /// <left neighbour of the impurity| G |right neighbour>: <N-1|G|1> (HN),
    /// <(N-1)B|G|0B> (SSH).
    ImpurityNeighbours,
    /// <0|G|N-1> (HN), <0B|G|(N-1)B> (SSH).
    Corner,
};

inline const char* to_string(ResponseElement e) {
    return e == ResponseElement::Corner ? "corner" : "impurity-neighbours";
}

inline std::pair<int, int> response_indices(const Model& m, ResponseElement e) {
    return std::visit(
        [&](const auto& p) -> std::pair<int, int> {
            const int N = p.N;
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HNParams>) {
                if (e == ResponseElement::Corner)
                    return {0, N - 1};
                return {N - 1, 1 % N};
            } else {
                if (e == ResponseElement::Corner)
                    return {ssh_index_b(0), ssh_index_b(N - 1)};
                return {ssh_index_b(N - 1), ssh_index_b(0)};
            }
        },
        m);
}

namespace detail {

inline cplx response_green(const Model& m, cplx Er, double V0, ResponseElement e) {
    const auto [row, col] = response_indices(m, e);
    return green_element(build_matrix(with_impurity(m, V0)), Er, row, col).value;
}

} // namespace detail

/// d ln G / d ln V0 by a centred difference in ln V0. The log of the ratio
/// G(V0 e^h) / G(V0 e^-h) keeps the branch continuous between the two
/// samples. The step is halved (up to five times) while the one-sided and
/// centred estimates differ by more than 1e-3.
inline cplx nu_log_derivative(const Model& m, cplx Er, double V0, double relStep = 1e-3,
                              ResponseElement element = ResponseElement::ImpurityNeighbours) {
    validate(m);
    if (!(V0 > 0.0))
        throw Error(ErrorKind::InvalidParameter, "nu_log_derivative: V0 must be positive");
    if (!(relStep > 0.0))
        throw Error(ErrorKind::InvalidParameter, "nu_log_derivative: step must be positive");
    const cplx g0 = detail::response_green(m, Er, V0, element);
    double h = relStep;
    cplx centred = 0.0;
    for (int halvings = 0; halvings <= 5; ++halvings, h *= 0.5) {
        const cplx gp = detail::response_green(m, Er, V0 * std::exp(h), element);
        const cplx gm = detail::response_green(m, Er, V0 * std::exp(-h), element);
        centred = std::log(gp / gm) / (2.0 * h);
        const cplx forward = std::log(gp / g0) / h;
        if (std::abs(forward - centred) <= 1e-3)
            break;
    }
    return centred;
}

/// V0 at which Er becomes an eigenvalue, from the secular equation solved
/// for the impurity: theta = arccos(Er / 2) (HN) or
/// cos(theta) = (Er^2 - t'^2 - 1) / (2 t') (SSH).
inline cplx critical_v0_for_energy(const Model& m, cplx Er) {
    validate(m);
    return std::visit(
        [&](const auto& p) -> cplx {
            constexpr bool isHN = std::is_same_v<std::decay_t<decltype(p)>, HNParams>;
            cplx cosTheta;
            if constexpr (isHN) {
                cosTheta = Er / 2.0;
            } else {
                if (Er == 0.0)
                    throw Error(ErrorKind::InvalidReference, "critical_v0_for_energy: Er = 0 for SSH");
                cosTheta = (Er * Er - p.tPrime * p.tPrime - 1.0) / (2.0 * p.tPrime);
            }
            const cplx theta = std::acos(cosTheta);
            // V = sin(theta)(2cos N theta - 2cosh Ng) / sin(N theta), scaled.
            const auto with0 = detail::scaled_secular(p.N, p.g, 0.0, theta);
            const double size = std::max(std::abs(with0.cosN), std::abs(with0.value) / std::max(std::abs(std::sin(theta)), 1e-300));
            if (std::abs(with0.sinN) <= 1e-14 * size)
                throw Error(ErrorKind::DegenerateReference, "critical_v0_for_energy: sin(N theta) vanishes",
                            std::abs(with0.sinN));
            const cplx vhn = with0.value / with0.sinN;
            if constexpr (isHN)
                return vhn;
            else
                return p.tPrime * vhn / Er;
        },
        m);
}

struct NuSeries {
    cplx Er;
    std::vector<double> v0Grid;
    std::vector<cplx> nuValues; ///< NaN where the resolvent was ill-conditioned
    cplx vcClosedForm;
    int failedPoints = 0;
    int jumpIndex = -1; ///< largest |Re dnu| lies between jumpIndex and jumpIndex + 1
    double jumpV0 = 0.0; ///< geometric midpoint of that interval
    ResponseElement element = ResponseElement::ImpurityNeighbours;
};

inline std::vector<double> log_grid(double start, double stop, int count) {
    if (count < 2 || !(start > 0.0) || !(stop > start))
        throw Error(ErrorKind::InvalidInput, "log_grid: need count >= 2 and 0 < start < stop");
    std::vector<double> out(count);
    const double a = std::log10(start);
    const double b = std::log10(stop);
    for (int i = 0; i < count; ++i)
        out[i] = std::pow(10.0, a + (b - a) * i / (count - 1));
    return out;
}

inline NuSeries nu_sweep(const Model& m, cplx Er, const std::vector<double>& v0Grid, int threads = 1,
                         ResponseElement element = ResponseElement::ImpurityNeighbours, double relStep = 1e-3) {
    validate(m);
    if (v0Grid.size() < 2)
        throw Error(ErrorKind::InvalidInput, "nu_sweep: grid needs at least two points");
    for (std::size_t i = 0; i < v0Grid.size(); ++i) {
        if (!(v0Grid[i] > 0.0))
            throw Error(ErrorKind::InvalidInput, "nu_sweep: grid must be positive");
        if (i > 0 && !(v0Grid[i] > v0Grid[i - 1]))
            throw Error(ErrorKind::InvalidInput, "nu_sweep: grid must be strictly increasing");
    }
    NuSeries out;
    out.Er = Er;
    out.v0Grid = v0Grid;
    out.element = element;
    out.vcClosedForm = critical_v0_for_energy(m, Er);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.nuValues = parallel_map(v0Grid.size(), threads, [&](std::size_t i) -> cplx {
        try {
            return nu_log_derivative(m, Er, v0Grid[i], relStep, element);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::IllConditioned)
                throw;
            return {nan, nan};
        }
    });
    double biggest = -1.0;
    for (std::size_t i = 0; i < out.nuValues.size(); ++i) {
        if (std::isnan(out.nuValues[i].real()))
            ++out.failedPoints;
        if (i + 1 == out.nuValues.size())
            break;
        const double d = std::abs(out.nuValues[i + 1].real() - out.nuValues[i].real());
        if (std::isfinite(d) && d > biggest) {
            biggest = d;
            out.jumpIndex = static_cast<int>(i);
        }
    }
    if (out.jumpIndex >= 0)
        out.jumpV0 = std::sqrt(v0Grid[out.jumpIndex] * v0Grid[out.jumpIndex + 1]);
    return out;
}

struct SpectralFlow {
    std::vector<double> v0Grid;
    std::vector<std::vector<cplx>> energies; ///< energies[i][track]
    std::vector<double> ambiguities;         ///< grid values where nearest-neighbour matching collided
};

/// Dense eigenvalues along the grid, linked into continuous tracks. Each
/// step uses the optimal assignment to the previous energies; where plain
/// nearest-neighbour matching would send two tracks to one level the grid
/// value is recorded as a branch ambiguity.
inline SpectralFlow spectral_flow(const Model& m, const std::vector<double>& v0Grid, int threads = 1) {
    validate(m);
    if (v0Grid.empty())
        throw Error(ErrorKind::InvalidInput, "spectral_flow: empty grid");
    for (std::size_t i = 1; i < v0Grid.size(); ++i)
        if (!(v0Grid[i] > v0Grid[i - 1]))
            throw Error(ErrorKind::InvalidInput, "spectral_flow: grid must be strictly increasing");
    const auto raw = parallel_map(v0Grid.size(), threads, [&](std::size_t i) {
        return to_std(dense_eigensolve(build_matrix(with_impurity(m, v0Grid[i]))).values);
    });
    SpectralFlow out;
    out.v0Grid = v0Grid;
    out.energies.push_back(raw[0]);
    for (std::size_t i = 1; i < raw.size(); ++i) {
        const auto& prev = out.energies.back();
        const auto& cur = raw[i];
        std::vector<int> nearest(prev.size());
        std::vector<int> hits(cur.size(), 0);
        for (std::size_t a = 0; a < prev.size(); ++a) {
            int best = 0;
            for (std::size_t b = 1; b < cur.size(); ++b)
                if (std::abs(cur[b] - prev[a]) < std::abs(cur[best] - prev[a]))
                    best = static_cast<int>(b);
            nearest[a] = best;
            ++hits[best];
        }
        if (std::any_of(hits.begin(), hits.end(), [](int h) { return h > 1; }))
            out.ambiguities.push_back(v0Grid[i]);
        const auto match = match_spectra(prev, cur);
        std::vector<cplx> next(prev.size());
        for (std::size_t a = 0; a < prev.size(); ++a)
            next[a] = cur[match.pairing[a]];
        out.energies.push_back(std::move(next));
    }
    return out;
}

} // namespace nhi
