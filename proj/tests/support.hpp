#pragma once

#include <algorithm>
#include <complex>
#include <vector>

#include "nhi/characteristic.hpp"
#include "nhi/oracle.hpp"

namespace nhi::test {

inline std::vector<cplx> energies(const std::vector<ModeSolution>& modes) {
    std::vector<cplx> out;
    for (const auto& m : modes)
        out.push_back(m.energy);
    return out;
}

inline std::vector<cplx> oracle_values(const Model& m) { return to_std(dense_eigensolve(build_matrix(m)).values); }

inline std::vector<cplx> conjugated(std::vector<cplx> v) {
    for (auto& z : v)
        z = std::conj(z);
    return v;
}

/// PBC ring energies 2cos(2 pi k / N + i g), k = 1..N.
inline std::vector<cplx> pbc_ellipse(int N, double g) {
    std::vector<cplx> out;
    for (int k = 1; k <= N; ++k)
        out.push_back(2.0 * std::cos(cplx(2.0 * kPi * k / N, g)));
    return out;
}

} // namespace nhi::test
