#pragma once

#include "qdet/density_matrix.hpp"

#include <functional>
#include <memory>

namespace qdet {

struct OdeOptions {
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    double dt_max = 1.0;
    /// Smallest step the controller may take before giving up.
    double dt_min = 1e-16;
};

/// drho = f(rho, t)
using MatrixRhs = std::function<void(const ComplexMatrix& rho, ComplexMatrix& drho, double t)>;

/// Adaptive Dormand-Prince 5(4) integration of a matrix ODE with embedded
/// error control. The stepper keeps its FSAL state and the last accepted step
/// size between calls, so a trajectory can be advanced stamp by stamp.
class MatrixIntegrator {
public:
    MatrixIntegrator(MatrixRhs rhs, int dim, const OdeOptions& opts);
    ~MatrixIntegrator();
    MatrixIntegrator(const MatrixIntegrator&) = delete;
    MatrixIntegrator& operator=(const MatrixIntegrator&) = delete;

    /// Advances rho from t to t_target exactly. Throws StiffnessError if the
    /// controller needs a step below dt_min.
    void advance(ComplexMatrix& rho, double& t, double t_target);

    /// Discards the FSAL derivative, e.g. after a discontinuity in the rhs.
    void reset();

    std::size_t accepted_steps() const { return accepted_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t accepted_ = 0;
};

} // namespace qdet
