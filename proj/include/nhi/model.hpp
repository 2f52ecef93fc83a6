#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "nhi/error.hpp"

namespace nhi {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

/// Hatano-Nelson ring with hoppings t e^{-g} (leftward) and t e^{g}
/// (rightward) and an on-site impurity V0 at site 0. t is the energy unit.
struct HNParams {
    int N = 2;
    double t = 1.0;
    double g = 0.0;
    cplx V0 = 0.0;
};

/// Non-reciprocal SSH ring: intra-cell e^{-g} (A<-B) and e^{g} (B<-A),
/// symmetric inter-cell t', impurity V0 on sublattice A of cell 0.
struct SSHParams {
    int N = 2;
    double t = 1.0;
    double tPrime = 1.0;
    double g = 0.0;
    cplx V0 = 0.0;
};

using Model = std::variant<HNParams, SSHParams>;

inline void validate(const HNParams& p) {
    if (p.N < 2)
        throw Error(ErrorKind::InvalidParameter, "HN: N must be >= 2, got " + std::to_string(p.N));
    if (p.t != 1.0)
        throw Error(ErrorKind::InvalidParameter, "HN: t is the energy unit and must equal 1");
    if (!std::isfinite(p.g) || !std::isfinite(p.V0.real()) || !std::isfinite(p.V0.imag()))
        throw Error(ErrorKind::InvalidParameter, "HN: g and V0 must be finite");
    if (!std::isfinite(std::cosh(p.N * p.g)))
        throw Error(ErrorKind::InvalidParameter, "HN: cosh(N g) overflows double precision");
}

inline void validate(const SSHParams& p) {
    if (p.N < 2)
        throw Error(ErrorKind::InvalidParameter, "SSH: N must be >= 2, got " + std::to_string(p.N));
    if (p.t != 1.0)
        throw Error(ErrorKind::InvalidParameter, "SSH: t is the energy unit and must equal 1");
    if (p.tPrime == 0.0 || !std::isfinite(p.tPrime))
        throw Error(ErrorKind::InvalidParameter, "SSH: t' must be finite and nonzero");
    if (!std::isfinite(p.g) || !std::isfinite(p.V0.real()) || !std::isfinite(p.V0.imag()))
        throw Error(ErrorKind::InvalidParameter, "SSH: g and V0 must be finite");
    if (!std::isfinite(std::cosh(p.N * p.g)))
        throw Error(ErrorKind::InvalidParameter, "SSH: cosh(N g) overflows double precision");
}

inline void validate(const Model& m) {
    std::visit([](const auto& p) { validate(p); }, m);
}

inline int dimension(const HNParams& p) { return p.N; }
inline int dimension(const SSHParams& p) { return 2 * p.N; }
inline int dimension(const Model& m) {
    return std::visit([](const auto& p) { return dimension(p); }, m);
}

inline cplx impurity(const Model& m) {
    return std::visit([](const auto& p) { return p.V0; }, m);
}

inline Model with_impurity(Model m, cplx V0) {
    std::visit([V0](auto& p) { p.V0 = V0; }, m);
    return m;
}

/// Dense Hamiltonian. Rows/columns follow site order for HN and the
/// interleaved (0A, 0B, 1A, 1B, ...) order for SSH.
struct LatticeMatrix {
    CMatrix entries;

    int dim() const { return static_cast<int>(entries.rows()); }
    cplx trace() const { return entries.trace(); }
    bool is_real() const { return entries.imag().cwiseAbs().maxCoeff() == 0.0; }
};

/// Ring links accumulate, so for N = 2 both bonds add onto the same entry.
inline LatticeMatrix build_hn_matrix(const HNParams& p) {
    validate(p);
    const int N = p.N;
    CMatrix H = CMatrix::Zero(N, N);
    const double left = p.t * std::exp(-p.g);
    const double right = p.t * std::exp(p.g);
    for (int n = 0; n < N; ++n) {
        const int next = (n + 1) % N;
        H(n, next) += left;
        H(next, n) += right;
    }
    H(0, 0) += p.V0;
    return {H};
}

inline int ssh_index_a(int cell) { return 2 * cell; }
inline int ssh_index_b(int cell) { return 2 * cell + 1; }

inline LatticeMatrix build_ssh_matrix(const SSHParams& p) {
    validate(p);
    const int N = p.N;
    CMatrix H = CMatrix::Zero(2 * N, 2 * N);
    for (int n = 0; n < N; ++n) {
        const int a = ssh_index_a(n);
        const int b = ssh_index_b(n);
        const int aNext = ssh_index_a((n + 1) % N);
        H(a, b) += p.t * std::exp(-p.g);
        H(b, a) += p.t * std::exp(p.g);
        H(b, aNext) += p.tPrime;
        H(aNext, b) += p.tPrime;
    }
    H(0, 0) += p.V0;
    return {H};
}

inline LatticeMatrix build_matrix(const Model& m) {
    return std::visit(
        [](const auto& p) {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HNParams>)
                return build_hn_matrix(p);
            else
                return build_ssh_matrix(p);
        },
        m);
}

/// PBC band e^{-g} e^{ik} + e^{g} e^{-ik} = 2 cos(k + i g).
inline cplx hn_dispersion(const HNParams& p, double k) {
    return 2.0 * p.t * std::cos(cplx(k, p.g));
}

/// Upper (branch = +1) or lower (branch = -1) PBC band of the SSH ring,
/// branch * sqrt(h_x^2 + h_y^2) with the principal square root.
inline cplx ssh_dispersion(const SSHParams& p, double k, int branch) {
    const cplx hx = p.tPrime * std::cos(k) + std::cosh(p.g);
    const cplx hy = cplx(p.tPrime * std::sin(k), -std::sinh(p.g));
    const cplx e = std::sqrt(hx * hx + hy * hy);
    return branch >= 0 ? e : -e;
}

} // namespace nhi
