#pragma once

#include "qdet/density_matrix.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace qdet {

/// Level occupations along a time axis (ns) or a flux axis (Phi0).
struct Trajectory {
    std::vector<double> stamps;
    std::vector<Eigen::VectorXd> occupations;
    /// Full density matrices, one per stamp, when requested.
    std::vector<ComplexMatrix> matrices;

    std::size_t size() const { return stamps.size(); }
    int dim() const { return occupations.empty() ? 0 : static_cast<int>(occupations.front().size()); }
    double occupation(std::size_t i, int level) const { return occupations[i](level); }

    void push(double stamp, const ComplexMatrix& rho, bool keep_matrix) {
        stamps.push_back(stamp);
        occupations.push_back(rho.diagonal().real());
        if (keep_matrix)
            matrices.push_back(rho);
    }
};

} // namespace qdet
