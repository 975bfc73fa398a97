#ifndef WKAM_TEST_FIXTURES_HPP
#define WKAM_TEST_FIXTURES_HPP

#include <wkam/homothetic.hpp>

namespace fixtures {

/// Two equal unit masses at (+-1/sqrt(2), 0): the normalized minimal two-body
/// configuration, U0 = 1/sqrt(2).
inline wkam::HomotheticOrbit two_body_orbit() {
    Eigen::MatrixXd pts(2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    pts << r, 0.0, -r, 0.0;
    wkam::Configuration a(wkam::Masses{1.0, 1.0}, pts);
    const double residual = wkam::centrality_residual(a);
    return wkam::HomotheticOrbit({std::move(a), 1.0 / std::sqrt(2.0), residual, 1, {}});
}

/// Unit-side equilateral triangle of three unit masses centered at the origin:
/// the Lagrange configuration with I = 1 and U0 = 3.
inline wkam::HomotheticOrbit lagrange_orbit() {
    Eigen::MatrixXd pts(3, 2);
    const double rho = 1.0 / std::sqrt(3.0);
    for (int k = 0; k < 3; ++k) {
        const double angle = 2.0 * 3.141592653589793 * k / 3.0;
        pts(k, 0) = rho * std::cos(angle);
        pts(k, 1) = rho * std::sin(angle);
    }
    wkam::Configuration a(wkam::Masses{1.0, 1.0, 1.0}, pts);
    const double residual = wkam::centrality_residual(a);
    return wkam::HomotheticOrbit({std::move(a), 3.0, residual, 1, {}});
}

}   // namespace fixtures

#endif
