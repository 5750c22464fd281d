#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace morphogen {

/// Boolean body lattice; cell (i, j) with j = 0 at the floor side.
struct BodyMask {
    int nx = 0;
    int ny = 0;
    std::vector<std::uint8_t> cells;
    std::string provenance = "rectangle";

    static BodyMask rectangle(int nx, int ny);

    bool at(int i, int j) const {
        if (i < 0 || j < 0 || i >= nx || j >= ny) return false;
        return cells[static_cast<std::size_t>(j) * nx + i] != 0;
    }
    std::size_t count() const;
    bool operator==(const BodyMask& other) const {
        return nx == other.nx && ny == other.ny && cells == other.cells;
    }
};

/// Reads an ASCII PGM (P2) image. Nonzero pixels become body cells; the image is
/// resampled nearest-neighbour onto an nx-by-ny lattice. Image row 0 is the top.
BodyMask load_mask(const std::filesystem::path& path, int nx, int ny);
BodyMask parse_pgm(const std::string& text, int nx, int ny, const std::string& provenance = "inline");

std::string to_pgm(const BodyMask& mask);

}  // namespace morphogen
