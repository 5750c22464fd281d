#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace morphogen {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Raised for configurations or inputs that cannot describe a robot body.
class DegenerateBody : public std::invalid_argument {
public:
    explicit DegenerateBody(const std::string& what)
        : std::invalid_argument("degenerate body: " + what) {}
};

/// Rectangular design workspace in centimetres, discretised by a particle lattice.
struct Workspace {
    double width_cm = 20.0;
    double height_cm = 14.0;
    int nx = 64;
    int ny = 44;

    bool operator==(const Workspace&) const = default;

    double area() const { return width_cm * height_cm; }
    double spacing_x() const { return width_cm / nx; }
    double spacing_y() const { return height_cm / ny; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
    }
    /// Rest position of lattice site (i, j); sites sit at cell centres.
    Vec2 site(int i, int j) const {
        return {(i + 0.5) * spacing_x(), (j + 0.5) * spacing_y()};
    }
    bool contains(const Vec2& p) const {
        return p.x() >= 0.0 && p.x() <= width_cm && p.y() >= 0.0 && p.y() <= height_cm;
    }
};

}  // namespace morphogen
