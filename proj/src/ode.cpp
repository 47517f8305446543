#include "qdet/ode.hpp"

#include "qdet/errors.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

namespace qdet {

namespace odeint = boost::numeric::odeint;

using State = std::vector<std::complex<double>>;
using Stepper = odeint::runge_kutta_dopri5<State>;
using Controlled = odeint::result_of::make_controlled<Stepper>::type;

struct MatrixIntegrator::Impl {
    MatrixRhs rhs;
    int dim;
    OdeOptions opts;
    Controlled stepper;
    double dt;
    ComplexMatrix in, out;

    Impl(MatrixRhs f, int n, const OdeOptions& o)
        : rhs(std::move(f)), dim(n), opts(o),
          stepper(odeint::make_controlled(o.abs_tol, o.rel_tol, o.dt_max, Stepper())),
          dt(o.dt_max), in(n, n), out(n, n) {}

    void system(const State& x, State& dxdt, double t) {
        in = Eigen::Map<const ComplexMatrix>(x.data(), dim, dim);
        rhs(in, out, t);
        dxdt.resize(x.size());
        Eigen::Map<ComplexMatrix>(dxdt.data(), dim, dim) = out;
    }
};

MatrixIntegrator::MatrixIntegrator(MatrixRhs rhs, int dim, const OdeOptions& opts)
    : impl_(std::make_unique<Impl>(std::move(rhs), dim, opts)) {}

MatrixIntegrator::~MatrixIntegrator() = default;

void MatrixIntegrator::reset() { impl_->stepper.reset(); }

void MatrixIntegrator::advance(ComplexMatrix& rho, double& t, double t_target) {
    if (t_target <= t)
        return;
    Impl& im = *impl_;
    State x(rho.data(), rho.data() + rho.size());
    auto sys = [&im](const State& s, State& ds, double tt) { im.system(s, ds, tt); };
    while (t < t_target) {
        const double remaining = t_target - t;
        const bool last = im.dt >= remaining;
        double dt = last ? remaining : im.dt;
        const double t_before = t;
        const auto res = im.stepper.try_step(sys, x, t, dt);
        if (res == odeint::success) {
            ++accepted_;
            if (last)
                t = t_target;  // clipped step: land exactly, keep the previous suggestion
            else
                im.dt = dt;
        } else {
            t = t_before;
            im.dt = dt;
            if (im.dt < im.opts.dt_min) {
                std::ostringstream msg;
                msg << "step size underflow (" << im.dt << ") at t = " << t
                    << "; the generator is too stiff for the explicit integrator, reduce Gamma*dt";
                throw StiffnessError(msg.str());
            }
        }
    }
    rho = Eigen::Map<const ComplexMatrix>(x.data(), im.dim, im.dim);
}

} // namespace qdet
