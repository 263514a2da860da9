#pragma once

#include "phwave/linalg.hpp"
#include "phwave/subsystem.hpp"

namespace phwave {

/// Below this step length the midpoint gradient is used directly.
inline constexpr double kDiscreteGradientSwitch = 1e-10;

/// Gonzalez midpoint discrete gradient.
///
///   dg(x, x') = dH(xm) + [(H(x') - H(x) - dH(xm)^T d) / |d|^2] d,   xm = (x + x')/2, d = x' - x
///
/// satisfies dg^T (x' - x) = H(x') - H(x) exactly and reduces to the midpoint gradient
/// for quadratic H.
inline Vec discrete_gradient(const SubsystemModel& model, const Vec& x, const Vec& x_next) {
    require_size(x, model.state_dim, "discrete_gradient: x");
    require_size(x_next, model.state_dim, "discrete_gradient: x_next");
    require_finite(x, "discrete_gradient: x");
    require_finite(x_next, "discrete_gradient: x_next");

    const Vec mid = 0.5 * (x + x_next);
    Vec grad = model.grad_hamiltonian(mid);
    const Vec delta = x_next - x;
    const double dd = delta.squaredNorm();
    if (std::sqrt(dd) < kDiscreteGradientSwitch) return grad;

    const double defect = model.gradient_defect
                              ? model.gradient_defect(x, x_next)
                              : model.hamiltonian(x_next) - model.hamiltonian(x) - grad.dot(delta);
    grad += (defect / dd) * delta;
    return grad;
}

/// Derivative of discrete_gradient with respect to x_next, built from the Hessian.
inline Mat discrete_gradient_jacobian(const SubsystemModel& model, const Vec& x, const Vec& x_next) {
    const Vec mid = 0.5 * (x + x_next);
    const Mat hess_mid = model.hessian(mid);
    Mat jac = 0.5 * hess_mid;
    const Vec delta = x_next - x;
    const double dd = delta.squaredNorm();
    if (std::sqrt(dd) < kDiscreteGradientSwitch) return jac;

    const Vec grad_mid = model.grad_hamiltonian(mid);
    const double defect = model.gradient_defect
                              ? model.gradient_defect(x, x_next)
                              : model.hamiltonian(x_next) - model.hamiltonian(x) - grad_mid.dot(delta);
    const double coeff = defect / dd;
    // d(defect)/dx' = dH(x') - dH(xm) - 1/2 Hess(xm) d
    const Vec ddefect = model.grad_hamiltonian(x_next) - grad_mid - 0.5 * hess_mid * delta;
    const Vec dcoeff = ddefect / dd - (2.0 * defect / (dd * dd)) * delta;
    jac += delta * dcoeff.transpose();
    jac.diagonal().array() += coeff;
    return jac;
}

}  // namespace phwave
