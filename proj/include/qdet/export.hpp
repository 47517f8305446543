#pragma once

#include "qdet/trajectory.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace qdet {

/// 17 significant digits, so values round-trip exactly.
std::string format_double(double v);

/// Occupations as CSV with header "<stamp_name>,rho_11,rho_22,..." (levels counted from one).
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::string& stamp_name);

/// Full density matrices, little-endian: per stamp a uint64 dimension followed by
/// dim*dim (re, im) double pairs in row-major order.
void write_matrix_dump(std::ostream& out, const Trajectory& traj);
std::vector<ComplexMatrix> read_matrix_dump(std::istream& in);

/// Writes text to path, creating nothing else.
void write_text_file(const std::string& path, const std::string& text);

} // namespace qdet
