/// @file special.hpp
/// @brief The few special functions the project needs: trigamma for the
/// analytic speckle variance, and the regularized incomplete beta for
/// Student-t p-values in the calibration regression.

#pragma once

namespace hydropinn {

/// Trigamma psi_1(x) for x > 0, via recurrence into the asymptotic regime.
/// psi_1(1) = pi^2/6.
[[nodiscard]] double trigamma(double x);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation
/// (modified Lentz). Domain: a, b > 0 and x in [0, 1].
[[nodiscard]] double inc_beta(double a, double b, double x);

/// Two-sided p-value of a t statistic with `dof` degrees of freedom:
/// p = I_{dof/(dof+t^2)}(dof/2, 1/2).
[[nodiscard]] double student_t_two_sided_p(double t, double dof);

}  // namespace hydropinn
