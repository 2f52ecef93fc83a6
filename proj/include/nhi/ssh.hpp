#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "nhi/characteristic.hpp"
#include "nhi/error.hpp"
#include "nhi/model.hpp"
#include "nhi/observables.hpp"
#include "nhi/oracle.hpp"
#include "nhi/parallel.hpp"
#include "nhi/polynomial.hpp"

namespace nhi {

struct EffectiveHN {
    cplx V;   ///< E V0 / t'
    cplx eps; ///< (E^2 - t'^2 - 1) / t'
};

/// Sublattice-A equations of the SSH ring at energy E are an HN ring with
/// impurity E V0 / t' at energy (E^2 - t'^2 - 1) / t'.
inline EffectiveHN reduce_ssh_to_hn(cplx E, const SSHParams& p) {
    if (p.tPrime == 0.0)
        throw Error(ErrorKind::InvalidParameter, "reduce_ssh_to_hn: t' must be nonzero");
    return {E * p.V0 / p.tPrime, (E * E - p.tPrime * p.tPrime - 1.0) / p.tPrime};
}

/// branch * sqrt(1 + t'^2 + 2 t' cos(theta)), principal root.
inline cplx ssh_energy_from_theta(cplx theta, double tPrime, int branch) {
    const cplx e = std::sqrt(1.0 + tPrime * tPrime + 2.0 * tPrime * std::cos(theta));
    return branch >= 0 ? e : -e;
}

struct SSHMode {
    cplx theta;
    int branch = 1;
    cplx energy;
    CVector amplitudesA;
    CVector amplitudesB;
    double residual = 0.0; ///< ||(H - E) psi|| / ||H||_F for the interleaved vector
    RootKind kind = RootKind::Bulk;
    bool zeroEnergy = false; ///< amplitudes from the dense null space (E ~ 0)
    bool refined = false;    ///< amplitudes polished by inverse iteration on H - E
    bool fromOracle = false; ///< mode taken from the dense eigensolver
};

struct SSHSolution {
    std::vector<SSHMode> modes;
    std::vector<std::string> warnings;
    bool denseFallback = false;
};

/// Squared secular equation as a polynomial in beta = e^{i theta}, degree 4N:
/// t'^2 K^2 - V0^2 R beta U^2 with K = beta^{2N} - 2cosh(Ng) beta^N + 1,
/// R = t' beta^2 + (1 + t'^2) beta + t', U = 1 + beta^2 + ... + beta^{2N-2}.
/// The trivial factor (beta^2 - 1)^2 is already divided out.
inline poly::Coefficients ssh_squared_polynomial(const SSHParams& p) {
    validate(p);
    const int N = p.N;
    const double tp = p.tPrime;
    auto multiply = [](const poly::Coefficients& a, const poly::Coefficients& b) {
        poly::Coefficients c(a.size() + b.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j)
                c[i + j] += a[i] * b[j];
        return c;
    };
    poly::Coefficients K(2 * N + 1, 0.0);
    K[0] = 1.0;
    K[N] -= 2.0 * std::cosh(N * p.g);
    K[2 * N] += 1.0;
    poly::Coefficients U(2 * N - 1, 0.0);
    for (int j = 0; j < N; ++j)
        U[2 * j] = 1.0;
    const poly::Coefficients R{tp, 1.0 + tp * tp, tp};
    const auto K2 = multiply(K, K);
    const auto RU2 = multiply(R, multiply(U, U));
    poly::Coefficients out(4 * N + 1, 0.0);
    for (std::size_t j = 0; j < K2.size(); ++j)
        out[j] += tp * tp * K2[j];
    const cplx v2 = p.V0 * p.V0;
    for (std::size_t j = 0; j < RU2.size(); ++j)
        out[j + 1] -= v2 * RU2[j];
    return out;
}

namespace detail {

/// Unsquared SSH secular function sin(theta)(2cos N theta - 2cosh Ng)
/// - (E V0 / t') sin(N theta) with E on the given branch, scaled.
struct SSHSecular {
    cplx value;
    cplx derivative;
    double residual;
    cplx energy;
};

inline SSHSecular ssh_secular(const SSHParams& p, cplx theta, cplx energy) {
    const cplx veff = energy * p.V0 / p.tPrime;
    const auto s = scaled_secular(p.N, p.g, veff, theta);
    SSHSecular out;
    out.value = s.value;
    out.residual = relative_residual(s);
    out.energy = energy;
    // dE/dtheta = -t' sin(theta) / E
    out.derivative = s.derivative;
    if (energy != 0.0)
        out.derivative += (p.V0 / p.tPrime) * (p.tPrime * std::sin(theta) / energy) * s.sinN;
    return out;
}

/// Energy on the square-root sheet closest to a reference value.
inline cplx track_energy(cplx theta, double tPrime, cplx reference) {
    const cplx e = ssh_energy_from_theta(theta, tPrime, 1);
    return std::abs(e - reference) <= std::abs(e + reference) ? e : -e;
}

/// Newton on the unsquared equation, tracking the square-root sheet. With a
/// nonzero `direction` the iterate stays on the line origin + direction * s.
inline cplx ssh_polish(const SSHParams& p, cplx theta, cplx& energy, cplx direction = 0.0) {
    auto cur = ssh_secular(p, theta, energy);
    for (int it = 0; it < 20; ++it) {
        if (cur.derivative == 0.0 || std::abs(energy) < 1e-12)
            break;
        cplx step = cur.value / cur.derivative;
        if (direction != 0.0)
            step = direction * std::real(step / direction);
        if (!std::isfinite(step.real()) || !std::isfinite(step.imag()) || std::abs(step) > 0.05)
            break;
        const cplx cand = theta - step;
        const cplx candE = track_energy(cand, p.tPrime, energy);
        const auto next = ssh_secular(p, cand, candE);
        if (next.residual > cur.residual && cur.residual < 1e-12)
            break;
        theta = cand;
        energy = candE;
        cur = next;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(theta)))
            break;
    }
    return theta;
}

inline double ssh_energy_scale(const SSHParams& p) { return 1.0 + std::abs(p.tPrime) + std::exp(std::abs(p.g)); }

inline void finish_mode(const SSHParams& p, const CMatrix& H, SSHMode& m) {
    CVector psi(2 * p.N);
    for (int n = 0; n < p.N; ++n) {
        psi(ssh_index_a(n)) = m.amplitudesA(n);
        psi(ssh_index_b(n)) = m.amplitudesB(n);
    }
    const double norm = psi.norm();
    psi /= norm;
    m.amplitudesA /= norm;
    m.amplitudesB /= norm;
    m.residual = matrix_residual(H, m.energy, psi);
}

inline SSHMode mode_from_vector(const SSHParams& p, const CMatrix& H, cplx E, const CVector& v) {
    SSHMode m;
    m.energy = E;
    const cplx c = (E * E - 1.0 - p.tPrime * p.tPrime) / (2.0 * p.tPrime);
    const double tol = real_tolerance(p.g);
    m.theta = canonical_theta(std::acos(c), tol);
    const cplx principal = ssh_energy_from_theta(m.theta, p.tPrime, 1);
    m.branch = std::abs(E - principal) <= std::abs(E + principal) ? 1 : -1;
    m.kind = classify_root(m.theta, E * p.V0 / p.tPrime, tol);
    m.amplitudesA.resize(p.N);
    m.amplitudesB.resize(p.N);
    for (int n = 0; n < p.N; ++n) {
        m.amplitudesA(n) = v(ssh_index_a(n));
        m.amplitudesB(n) = v(ssh_index_b(n));
    }
    finish_mode(p, H, m);
    return m;
}

inline SSHSolution solve_ssh_dense(const SSHParams& p, std::string reason) {
    const LatticeMatrix lm = build_ssh_matrix(p);
    const auto dec = dense_eigensolve(lm, true);
    SSHSolution out;
    out.denseFallback = true;
    out.warnings.push_back(std::move(reason));
    for (Eigen::Index i = 0; i < dec.values.size(); ++i) {
        auto m = mode_from_vector(p, lm.entries, dec.values(i), dec.vectors->col(i));
        m.fromOracle = true;
        m.kind = RootKind::Bulk;
        out.modes.push_back(std::move(m));
    }
    // Same convention as oracle_bulk_energies: the extreme level on the side
    // of a real impurity is the bound state.
    if (p.V0.imag() == 0.0 && p.V0.real() != 0.0 && !out.modes.empty()) {
        auto byRe = [](const SSHMode& a, const SSHMode& b) { return a.energy.real() < b.energy.real(); };
        auto it = p.V0.real() > 0.0 ? std::max_element(out.modes.begin(), out.modes.end(), byRe)
                                    : std::min_element(out.modes.begin(), out.modes.end(), byRe);
        it->kind = RootKind::Bound;
    }
    return out;
}

struct SSHCandidate {
    cplx theta;
    int branch;
    cplx energy;
    double residual;
    bool ambiguous;
};

/// Polish a root guess on one sheet of E(theta); real roots are pinned to
/// the real axis when the impurity is real.
inline SSHCandidate polish_branch(const SSHParams& p, cplx t0, int sign) {
    const double tol = real_tolerance(p.g);
    cplx E = ssh_energy_from_theta(t0, p.tPrime, sign);
    cplx th = canonical_theta(ssh_polish(p, t0, E), tol);
    E = track_energy(th, p.tPrime, E);
    double r = ssh_secular(p, th, E).residual;
    if (p.V0.imag() == 0.0) {
        // Pin to the real axis or to Re(theta) in {0, pi}; E^2 is then real.
        cplx origin = 0.0;
        cplx direction = 0.0;
        if (std::abs(th.imag()) <= tol) {
            direction = 1.0;
        } else if (std::abs(th.real()) <= tol) {
            direction = cplx(0.0, 1.0);
        } else if (std::abs(std::abs(th.real()) - kPi) <= tol) {
            origin = kPi;
            direction = cplx(0.0, 1.0);
        }
        if (direction != 0.0) {
            const cplx start = origin + direction * std::real((th - origin) / direction);
            cplx Ep = track_energy(start, p.tPrime, E);
            cplx pinned = ssh_polish(p, start, Ep, direction);
            pinned = origin + direction * std::real((pinned - origin) / direction);
            Ep = track_energy(pinned, p.tPrime, Ep);
            const cplx e2 = 1.0 + p.tPrime * p.tPrime + 2.0 * p.tPrime * std::cos(pinned);
            if (e2.real() >= 0.0)
                Ep = Ep.real() >= 0.0 ? std::sqrt(e2.real()) : -std::sqrt(e2.real());
            else
                Ep = Ep.imag() >= 0.0 ? cplx(0.0, std::sqrt(-e2.real())) : cplx(0.0, -std::sqrt(-e2.real()));
            const double rp = ssh_secular(p, pinned, Ep).residual;
            if (rp <= std::max(10.0 * r, 1e-12)) {
                th = canonical_theta(pinned, tol);
                E = Ep;
                r = rp;
            }
        }
    }
    const cplx principal = ssh_energy_from_theta(th, p.tPrime, 1);
    const int branch = std::abs(E - principal) <= std::abs(E + principal) ? 1 : -1;
    return {th, branch, E, r, false};
}

} // namespace detail

/// Exact 2N-mode eigensystem of the SSH impurity ring. Each reciprocal
/// pair of roots of the squared polynomial is one mode; its branch is the
/// sign of E that satisfies the unsquared equation. Falls back to the dense
/// solver for N|g| > 30 or when a root cannot be validated.
inline SSHSolution solve_ssh_exact(const SSHParams& p) {
    validate(p);
    const int N = p.N;
    if (N * std::abs(p.g) > 30.0)
        return detail::solve_ssh_dense(p, "N|g| > 30: squared polynomial not representable, dense fallback");

    auto coeffs = ssh_squared_polynomial(p);
    double cmax = 0.0;
    for (const auto& c : coeffs)
        cmax = std::max(cmax, std::abs(c));
    for (auto& c : coeffs)
        c /= cmax;

    const double tol = real_tolerance(p.g);
    constexpr double kBranchTolerance = 1e-6;
    std::vector<detail::SSHCandidate> cands;
    double defect = 0.0;
    bool ok = false;
    if (p.V0 == 0.0) {
        // Clean ring: theta_k = 2 pi k / N + i g on both branches; the squared
        // polynomial has fourfold roots here, so it is bypassed.
        for (int k = 0; k < N; ++k) {
            const cplx th = detail::canonical_theta(cplx(2.0 * kPi * k / N, p.g), tol);
            for (int s : {1, -1})
                cands.push_back({th, s, ssh_energy_from_theta(th, p.tPrime, s), 0.0, false});
        }
        ok = true;
    }
    for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
        std::vector<cplx> start;
        try {
            start = attempt == 0 ? poly::companion_roots(coeffs) : poly::newton_polygon_guesses(coeffs);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NumericalFailure)
                throw;
            continue;
        }
        const auto refined = poly::aberth(coeffs, std::move(start));
        const auto reps = detail::pair_reciprocal_roots(refined.roots, tol, defect);
        if (defect > 1e-5 || static_cast<int>(reps.size()) != 2 * N)
            continue;
        cands.clear();
        ok = true;
        for (const cplx& t0 : reps) {
            // Branch from the unpolished residuals; polishing the wrong sheet can
            // converge onto a neighbouring root of the other branch.
            std::array<double, 2> r0{};
            for (int k = 0; k < 2; ++k)
                r0[k] = detail::ssh_secular(p, t0, ssh_energy_from_theta(t0, p.tPrime, k == 0 ? 1 : -1)).residual;
            const int pick = r0[0] <= r0[1] ? 0 : 1;
            detail::SSHCandidate best = detail::polish_branch(p, t0, pick == 0 ? 1 : -1);
            best.ambiguous = r0[1 - pick] <= std::max(100.0 * r0[pick], 1e-12);
            if (best.residual > kBranchTolerance)
                ok = false;
            cands.push_back(best);
        }
    }
    if (!ok)
        return detail::solve_ssh_dense(p, "exact root validation failed (pairing defect " + std::to_string(defect) +
                                              "), dense fallback");

    // Where both branches solve the equation (V0 = 0 or E = 0), coincident
    // roots are split between the two branches.
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (!cands[i].ambiguous)
            continue;
        for (std::size_t j = i + 1; j < cands.size(); ++j) {
            if (!cands[j].ambiguous || detail::theta_distance(cands[i].theta, cands[j].theta) > 1e-6)
                continue;
            if (cands[j].branch == cands[i].branch) {
                cands[j].branch = -cands[i].branch;
                cands[j].energy = -cands[j].energy;
            }
            cands[i].ambiguous = cands[j].ambiguous = false;
            break;
        }
    }

    const LatticeMatrix lm = build_ssh_matrix(p);
    const double zeroScale = 1e-9 * detail::ssh_energy_scale(p);
    SSHSolution out;
    std::vector<std::size_t> zeroModes;
    for (const auto& c : cands) {
        SSHMode m;
        m.theta = c.theta;
        m.branch = c.branch;
        m.energy = c.energy;
        const cplx veff = c.energy * p.V0 / p.tPrime;
        m.kind = detail::classify_root(c.theta, veff, tol);
        if (std::abs(c.energy) <= zeroScale) {
            m.zeroEnergy = true;
            zeroModes.push_back(out.modes.size());
            out.modes.push_back(std::move(m));
            continue;
        }
        ThetaRoot root;
        root.theta = c.theta;
        root.beta = std::exp(cplx(0.0, 1.0) * c.theta);
        root.residual = c.residual;
        root.kind = m.kind;
        const auto hn = detail::reconstruct_hn_mode(N, p.g, veff, root);
        m.amplitudesA = hn.amplitudes;
        m.amplitudesB.resize(N);
        for (int n = 0; n < N; ++n)
            m.amplitudesB(n) = (std::exp(p.g) * hn.amplitudes(n) + p.tPrime * hn.amplitudes((n + 1) % N)) / c.energy;
        detail::finish_mode(p, lm.entries, m);
        out.modes.push_back(std::move(m));
    }
    if (!zeroModes.empty()) {
        // Right singular vectors of the smallest singular values span the null space.
        CMatrix A = lm.entries;
        Eigen::JacobiSVD<CMatrix> svd(A, Eigen::ComputeFullV);
        const Eigen::Index dim = A.cols();
        for (std::size_t k = 0; k < zeroModes.size(); ++k) {
            SSHMode& m = out.modes[zeroModes[k]];
            const CVector v = svd.matrixV().col(dim - 1 - static_cast<Eigen::Index>(k));
            m.amplitudesA.resize(N);
            m.amplitudesB.resize(N);
            for (int n = 0; n < N; ++n) {
                m.amplitudesA(n) = v(ssh_index_a(n));
                m.amplitudesB(n) = v(ssh_index_b(n));
            }
            detail::finish_mode(p, lm.entries, m);
        }
        out.warnings.push_back(std::to_string(zeroModes.size()) + " zero-energy mode(s) taken from the dense null space");
    }
    // Near an exceptional point the closed-form amplitudes lose accuracy
    // (coalescing roots, division by a small E); inverse iteration at the
    // exact energy restores them.
    const double hNorm = lm.entries.norm();
    for (auto& m : out.modes) {
        if (m.residual <= 1e-10)
            continue;
        CMatrix A = lm.entries;
        A.diagonal().array() -= m.energy + 1e-14 * hNorm;
        Eigen::PartialPivLU<CMatrix> lu(A);
        CVector x(2 * N);
        for (int n = 0; n < N; ++n) {
            x(ssh_index_a(n)) = m.amplitudesA(n);
            x(ssh_index_b(n)) = m.amplitudesB(n);
        }
        for (int it = 0; it < 3; ++it) {
            CVector y = lu.solve(x);
            if (!y.allFinite() || y.norm() == 0.0)
                break;
            x = y.normalized();
        }
        SSHMode trial = m;
        for (int n = 0; n < N; ++n) {
            trial.amplitudesA(n) = x(ssh_index_a(n));
            trial.amplitudesB(n) = x(ssh_index_b(n));
        }
        detail::finish_mode(p, lm.entries, trial);
        if (trial.residual < m.residual) {
            trial.refined = true;
            m = std::move(trial);
        }
    }
    for (const auto& m : out.modes)
        if (m.residual > 1e-7)
            return detail::solve_ssh_dense(p, "exact eigenvector residual " + std::to_string(m.residual) +
                                                  " above 1e-7, dense fallback");
    // In-gap levels of the negative branch can also sit on an imaginary-theta
    // axis; only the most strongly localized one is the impurity bound state.
    SSHMode* bound = nullptr;
    for (auto& m : out.modes) {
        if (m.kind != RootKind::Bound)
            continue;
        if (bound == nullptr || m.theta.imag() > bound->theta.imag()) {
            if (bound != nullptr)
                bound->kind = RootKind::Bulk;
            bound = &m;
        } else {
            m.kind = RootKind::Bulk;
        }
    }
    std::sort(out.modes.begin(), out.modes.end(),
              [](const SSHMode& a, const SSHMode& b) { return detail::lex_less(a.energy, b.energy); });
    return out;
}

inline SpectrumReport classify_spectrum(const std::vector<SSHMode>& modes, double tol = kRealnessTolerance) {
    std::vector<cplx> e;
    std::vector<bool> bound;
    for (const auto& m : modes) {
        e.push_back(m.energy);
        bound.push_back(m.kind == RootKind::Bound);
    }
    return classify_energies(e, bound, tol);
}

/// Mean IPR of the full interleaved SSH eigenvectors.
inline double average_ipr(const std::vector<SSHMode>& modes, bool includeBound = false) {
    double sum = 0.0;
    int count = 0;
    for (const auto& m : modes) {
        if (!includeBound && m.kind == RootKind::Bound)
            continue;
        CVector psi(2 * m.amplitudesA.size());
        for (Eigen::Index n = 0; n < m.amplitudesA.size(); ++n) {
            psi(2 * n) = m.amplitudesA(n);
            psi(2 * n + 1) = m.amplitudesB(n);
        }
        sum += ipr(psi);
        ++count;
    }
    if (count == 0)
        throw Error(ErrorKind::InvalidInput, "average_ipr: no modes selected");
    return sum / count;
}

// ---------------------------------------------------------------------------
// Gap scan over t'.

inline constexpr double kClosingTolerance = 1e-2;

struct GapScanRow {
    double tPrime = 0.0;
    double minAbsE = 0.0;
    bool closing = false;
    bool zeroModeExcluded = false;
};

struct GapMinimum {
    double tPrime = 0.0;
    double minAbsE = 0.0;
    bool closing = false;
};

struct GapScan {
    std::vector<GapScanRow> rows;
    std::vector<GapMinimum> minima;
};

/// A strong real impurity detaches site 0A; the remaining odd chain is
/// bipartite and carries one zero mode for every t'. That level says
/// nothing about the band gap and is left out of min |E|.
inline bool chiral_zero_mode_excluded(const SSHParams& p) {
    if (p.V0.imag() != 0.0 || !(p.V0.real() > 0.0))
        return false;
    const double v = p.V0.real();
    return v >= critical_v0_ssh(p.N, p.g, p.tPrime) && v >= 10.0 * (std::exp(std::abs(p.g)) + std::abs(p.tPrime));
}

inline GapScanRow gap_scan_point(const SSHParams& p) {
    auto values = dense_eigensolve(build_ssh_matrix(p)).values;
    std::vector<double> mags(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i)
        mags[i] = std::abs(values(i));
    std::sort(mags.begin(), mags.end());
    GapScanRow row;
    row.tPrime = p.tPrime;
    row.zeroModeExcluded = chiral_zero_mode_excluded(p) && mags.size() > 1;
    row.minAbsE = row.zeroModeExcluded ? mags[1] : mags[0];
    row.closing = row.minAbsE < kClosingTolerance;
    return row;
}

/// min |E| over the dense spectrum for each t' in the grid. Grid-local
/// minima are refined by golden-section search between their neighbours;
/// a minimum is a closing when the refined value is below 1e-2.
inline GapScan gap_scan(const SSHParams& base, const std::vector<double>& tPrimeGrid, int threads = 1) {
    if (tPrimeGrid.empty())
        throw Error(ErrorKind::InvalidInput, "gap_scan: empty t' grid");
    for (std::size_t i = 0; i < tPrimeGrid.size(); ++i) {
        if (tPrimeGrid[i] == 0.0)
            throw Error(ErrorKind::InvalidParameter, "gap_scan: t' = 0 in grid");
        if (i > 0 && !(tPrimeGrid[i] > tPrimeGrid[i - 1]))
            throw Error(ErrorKind::InvalidInput, "gap_scan: t' grid must be strictly increasing");
    }
    auto at = [&](double tp) {
        SSHParams p = base;
        p.tPrime = tp;
        return gap_scan_point(p);
    };
    GapScan out;
    out.rows = parallel_map(tPrimeGrid.size(), threads, [&](std::size_t i) { return at(tPrimeGrid[i]); });

    const auto& rows = out.rows;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i)
        if (rows[i].minAbsE < rows[i - 1].minAbsE && rows[i].minAbsE <= rows[i + 1].minAbsE)
            candidates.push_back(i);
    out.minima = parallel_map(candidates.size(), threads, [&](std::size_t k) {
        const std::size_t i = candidates[k];
        double a = rows[i - 1].tPrime;
        double b = rows[i + 1].tPrime;
        // never step onto t' = 0
        if (a < 0.0 && b > 0.0) {
            if (rows[i].tPrime < 0.0)
                b = 0.5 * rows[i].tPrime;
            else
                a = 0.5 * rows[i].tPrime;
        }
        const double tBest = detail::golden_max([&](double tp) { return -at(tp).minAbsE; }, a, b);
        GapMinimum m;
        const double refined = at(tBest).minAbsE;
        if (refined <= rows[i].minAbsE) {
            m.tPrime = tBest;
            m.minAbsE = refined;
        } else {
            m.tPrime = rows[i].tPrime;
            m.minAbsE = rows[i].minAbsE;
        }
        m.closing = m.minAbsE < kClosingTolerance;
        return m;
    });
    for (std::size_t k = 0; k < candidates.size(); ++k)
        if (out.minima[k].closing)
            out.rows[candidates[k]].closing = true;
    return out;
}

} // namespace nhi
