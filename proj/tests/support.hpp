#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "texmesh/vec.hpp"

namespace testsupport {

inline double rel_err(double analytic, double numeric)
{
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Relative check with an absolute floor for gradients near FD roundoff.
inline bool grad_close(double analytic, double numeric, double rel, double abs_tol = 1e-9)
{
    return std::abs(analytic - numeric) < abs_tol || rel_err(analytic, numeric) < rel;
}

/// Central difference of f with respect to x[i].
inline double central_diff(const std::function<double()>& f, double& x, double h = 1e-5)
{
    const double x0 = x;
    x = x0 + h;
    const double fp = f();
    x = x0 - h;
    const double fm = f();
    x = x0;
    return (fp - fm) / (2.0 * h);
}

inline std::vector<double> uniform_vec(std::size_t n, double lo, double hi, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

inline texmesh::Vec3 uniform_vec3(double lo, double hi, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(lo, hi);
    const double x = u(rng), y = u(rng), z = u(rng);
    return {x, y, z};
}

/// SDF values bounded away from zero so no crossing sits on a grid vertex.
inline std::vector<double> random_sdf(std::size_t n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> mag(0.05, 1.0);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> s(n);
    for (double& v : s) v = sign(rng) ? mag(rng) : -mag(rng);
    return s;
}

} // namespace testsupport
