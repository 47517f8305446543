#include "qdet/export.hpp"

#include "qdet/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>

namespace qdet {

static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::string& stamp_name) {
    out << stamp_name;
    for (int k = 1; k <= traj.dim(); ++k)
        out << ",rho_" << k << k;
    out << '\n';
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out << format_double(traj.stamps[i]);
        for (int k = 0; k < traj.dim(); ++k)
            out << ',' << format_double(traj.occupation(i, k));
        out << '\n';
    }
}

void write_matrix_dump(std::ostream& out, const Trajectory& traj) {
    for (const ComplexMatrix& m : traj.matrices) {
        const auto dim = static_cast<std::uint64_t>(m.rows());
        out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double pair[2] = {m(r, c).real(), m(r, c).imag()};
                out.write(reinterpret_cast<const char*>(pair), sizeof pair);
            }
    }
}

std::vector<ComplexMatrix> read_matrix_dump(std::istream& in) {
    std::vector<ComplexMatrix> out;
    std::uint64_t dim = 0;
    while (in.read(reinterpret_cast<char*>(&dim), sizeof dim)) {
        if (dim == 0 || dim > 4096)
            throw DomainError("corrupt matrix dump");
        ComplexMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                double pair[2];
                if (!in.read(reinterpret_cast<char*>(pair), sizeof pair))
                    throw DomainError("truncated matrix dump");
                m(r, c) = {pair[0], pair[1]};
            }
        out.push_back(std::move(m));
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw DomainError("cannot write '" + path + "'");
    f << text;
    if (!f)
        throw DomainError("write failed for '" + path + "'");
}

} // namespace qdet
