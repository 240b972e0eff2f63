#pragma once

#include <vector>

#include "spincant/grid.hpp"

namespace spincant {

// Orthonormal eigenfunction u_n of (p^2 + z^2)/2, computed by the stable
// normalized recurrence u_{n+1} = z sqrt(2/(n+1)) u_n - sqrt(n/(n+1)) u_{n-1}
// from u_0 = pi^{-1/4} exp(-z^2/2). Far beyond the classical turning point
// (z^2 > 1490) every u_n with n in the supported range is below 1e-60 and
// the value underflows; zeros are returned there.
double hermite_u(int n, double z);

// Table of u_n(z_i) for n < n_max over the grid, row-major [i * n_max + n].
std::vector<double> hermite_table(const Grid& grid, int n_max);

}
