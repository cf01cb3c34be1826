#pragma once

#include <cstdint>

namespace kcsp {

/// Every tunable default in one place. CLI flags override the runtime ones.
namespace defaults {

// genfn
inline constexpr double series_cutoff = 1e-4;    // q, Q below this use the x^6 series
inline constexpr double q_inverse_guard = 1e-9;  // Q_inverse needs t > 2 + guard
inline constexpr double q_inverse_tol = 1e-12;
inline constexpr int q_inverse_max_iter = 200;
inline constexpr double inverse_tol = 1e-10;     // R_inverse, P_inverse residuals
inline constexpr double r_inverse_radius = 0.15; // times k, around (k/3, k/3)
inline constexpr double p_inverse_radius = 0.25; // times k, around k(1 - 1/d)
inline constexpr double imag_residue_tol = 1e-10;

// grid verification
inline constexpr int grid_1d = 4096;
inline constexpr int grid_2d = 256;
inline constexpr int grid_min = 256;
inline constexpr double monotone_tol = 1e-12;  // strict steps must be below -tol * scale
inline constexpr double bound_margin = 1e-6;   // "<= 3 - delta" means max <= 3 - margin
inline constexpr double opt_slack = 1e-9;
inline constexpr double eps_neighborhood = 0.02;
inline constexpr double laplace_eps = 0.05;  // covers the soft Hessian direction at n = 1600

// numeric Hessian
inline constexpr double hessian_step = 1e-4;

// simulation
inline constexpr int threshold_trials = 200;
inline constexpr int threshold_max_points = 12;
inline constexpr double threshold_gamma_tol = 0.002;  // stop once the decisive points are this close
inline constexpr int threshold_min_trials = 50;
inline constexpr double wilson_z = 1.959963984540054;
inline constexpr int ue_backtrack_max_n = 2000;

// exact
inline constexpr std::uint64_t enumeration_guard = 10'000'000;

}  // namespace defaults
}  // namespace kcsp
