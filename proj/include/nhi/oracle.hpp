#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "nhi/error.hpp"
#include "nhi/model.hpp"
#include "nhi/polynomial.hpp"

namespace nhi {

struct EigenDecomposition {
    CVector values;
    std::optional<CMatrix> vectors; ///< unit-norm right eigenvectors as columns
    double maxResidual = 0.0;       ///< max_i ||H v_i - lambda_i v_i|| / ||H||_F, 0 without vectors
};

namespace detail {

inline bool lex_less(cplx a, cplx b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
}

template <typename Solver>
void check_solver(const Solver& solver) {
    if (solver.info() != Eigen::Success)
        throw Error(ErrorKind::NumericalFailure, "dense_eigensolve: eigenvalue iteration did not converge");
}

} // namespace detail

/// Full eigensystem of a dense matrix, ordered lexicographically by
/// (Re, Im). Real matrices use a real Schur decomposition, so real
/// eigenvalues come out with exactly zero imaginary part.
inline EigenDecomposition dense_eigensolve(const LatticeMatrix& m, bool wantVectors = false) {
    const int n = m.dim();
    if (n > 128)
        throw Error(ErrorKind::InvalidInput, "dense_eigensolve: dimension above 128", n);
    CVector values(n);
    CMatrix vectors;
    if (m.is_real()) {
        Eigen::MatrixXd A = m.entries.real();
        const Eigen::VectorXd scale = poly::balance(A);
        Eigen::EigenSolver<Eigen::MatrixXd> solver(A, wantVectors);
        detail::check_solver(solver);
        values = solver.eigenvalues();
        if (wantVectors)
            vectors = scale.asDiagonal() * solver.eigenvectors();
    } else {
        CMatrix A = m.entries;
        const Eigen::VectorXd scale = poly::balance(A);
        Eigen::ComplexEigenSolver<CMatrix> solver(A, wantVectors);
        detail::check_solver(solver);
        values = solver.eigenvalues();
        if (wantVectors)
            vectors = scale.asDiagonal() * solver.eigenvectors();
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return detail::lex_less(values(a), values(b)); });

    EigenDecomposition out;
    out.values.resize(n);
    for (int i = 0; i < n; ++i)
        out.values(i) = values(order[i]);
    if (wantVectors) {
        CMatrix sorted(n, n);
        const double hNorm = std::max(m.entries.norm(), std::numeric_limits<double>::min());
        for (int i = 0; i < n; ++i) {
            sorted.col(i) = vectors.col(order[i]).normalized();
            const double r = (m.entries * sorted.col(i) - out.values(i) * sorted.col(i)).norm() / hNorm;
            out.maxResidual = std::max(out.maxResidual, r);
        }
        out.vectors = std::move(sorted);
    }
    return out;
}

struct GreenElement {
    cplx value;
    double conditionEstimate = 0.0; ///< 1-norm estimate after row equilibration
};

/// Ill-conditioning threshold for resolvent solves.
inline constexpr double kGreenConditionLimit = 1e12;

/// Element (row, col) of (Er - H)^{-1}. Rows are equilibrated before the LU
/// so a large impurity does not inflate the estimate on its own.
inline GreenElement green_element(const LatticeMatrix& m, cplx Er, int row, int col) {
    const int n = m.dim();
    if (row < 0 || row >= n || col < 0 || col >= n)
        throw Error(ErrorKind::InvalidInput, "green_element: index out of range");
    CMatrix A = -m.entries;
    A.diagonal().array() += Er;
    Eigen::VectorXd rowScale(n);
    for (int i = 0; i < n; ++i) {
        const double rmax = A.row(i).cwiseAbs().maxCoeff();
        if (rmax == 0.0)
            throw Error(ErrorKind::IllConditioned, "green_element: zero row in Er - H",
                        std::numeric_limits<double>::infinity());
        rowScale(i) = 1.0 / rmax;
    }
    A = rowScale.asDiagonal() * A;
    Eigen::PartialPivLU<CMatrix> lu(A);
    const double rcond = lu.rcond();
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!std::isfinite(cond) || cond > kGreenConditionLimit)
        throw Error(ErrorKind::IllConditioned, "green_element: Er - H is near-singular", cond);
    CVector rhs = CVector::Zero(n);
    rhs(col) = rowScale(col);
    const CVector x = lu.solve(rhs);
    return {x(row), cond};
}

struct SpectrumMatch {
    std::vector<int> pairing; ///< pairing[i] = index in b matched to a[i]
    double maxDistance = 0.0;
    double meanDistance = 0.0;
};

/// Minimum-cost bijection between two equally sized multisets under
/// |a_i - b_j| (Hungarian algorithm, O(n^3)).
inline SpectrumMatch match_spectra(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::InvalidInput, "match_spectra: size mismatch");
    const int n = static_cast<int>(a.size());
    SpectrumMatch out;
    out.pairing.assign(n, -1);
    if (n == 0)
        return out;
    constexpr double inf = std::numeric_limits<double>::infinity();
    // Potentials u (rows), v (columns); p[j] = row assigned to column j (1-based).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<bool> used(n + 1);
    auto cost = [&](int i, int j) { return std::abs(a[i - 1] - b[j - 1]); };
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j])
                    continue;
                const double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double sum = 0.0;
    for (int j = 1; j <= n; ++j) {
        const int i = p[j] - 1;
        out.pairing[i] = j - 1;
        const double d = std::abs(a[i] - b[j - 1]);
        out.maxDistance = std::max(out.maxDistance, d);
        sum += d;
    }
    out.meanDistance = sum / n;
    return out;
}

inline std::vector<cplx> to_std(const CVector& v) { return {v.data(), v.data() + v.size()}; }

} // namespace nhi
