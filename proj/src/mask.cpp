#include "morphogen/mask.hpp"

#include "morphogen/types.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace morphogen {

BodyMask BodyMask::rectangle(int nx, int ny) {
    if (nx <= 0 || ny <= 0) throw DegenerateBody("mask dimensions must be positive");
    BodyMask m;
    m.nx = nx;
    m.ny = ny;
    m.cells.assign(static_cast<std::size_t>(nx) * ny, 1);
    m.provenance = "rectangle";
    return m;
}

std::size_t BodyMask::count() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; }));
}

namespace {

// Whitespace-separated PGM tokens with '#' comments stripped.
std::vector<std::string> pgm_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream words(line);
        std::string w;
        while (words >> w) tokens.push_back(w);
    }
    return tokens;
}

long parse_int(const std::string& token, const char* what) {
    std::size_t used = 0;
    long value = 0;
    try {
        value = std::stol(token, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != token.size()) throw std::runtime_error(std::string("malformed PGM: bad ") + what + " '" + token + "'");
    return value;
}

}  // namespace

BodyMask parse_pgm(const std::string& text, int nx, int ny, const std::string& provenance) {
    if (nx <= 0 || ny <= 0) throw std::invalid_argument("mask grid dimensions must be positive");
    const auto tokens = pgm_tokens(text);
    if (tokens.size() < 4 || tokens[0] != "P2") throw std::runtime_error("malformed PGM: expected P2 header");
    const long width = parse_int(tokens[1], "width");
    const long height = parse_int(tokens[2], "height");
    const long maxval = parse_int(tokens[3], "maxval");
    if (width <= 0 || height <= 0) throw std::runtime_error("malformed PGM: non-positive dimensions");
    if (maxval <= 0 || maxval > 65535) throw std::runtime_error("malformed PGM: maxval out of range");
    const auto pixels = static_cast<std::size_t>(width * height);
    if (tokens.size() != 4 + pixels) {
        throw std::runtime_error("malformed PGM: expected " + std::to_string(pixels) + " pixels, found " +
                                 std::to_string(tokens.size() - 4));
    }
    std::vector<long> image(pixels);
    for (std::size_t k = 0; k < pixels; ++k) {
        image[k] = parse_int(tokens[4 + k], "pixel");
        if (image[k] < 0 || image[k] > maxval) throw std::runtime_error("malformed PGM: pixel exceeds maxval");
    }

    BodyMask mask;
    mask.nx = nx;
    mask.ny = ny;
    mask.provenance = provenance;
    mask.cells.assign(static_cast<std::size_t>(nx) * ny, 0);
    for (int j = 0; j < ny; ++j) {
        // lattice row j counts upward from the floor; image rows count downward
        const long row = std::min<long>(height - 1, static_cast<long>((ny - 1 - j + 0.5) * height / ny));
        for (int i = 0; i < nx; ++i) {
            const long col = std::min<long>(width - 1, static_cast<long>((i + 0.5) * width / nx));
            mask.cells[static_cast<std::size_t>(j) * nx + i] = image[row * width + col] != 0 ? 1 : 0;
        }
    }
    if (mask.count() == 0) throw DegenerateBody("mask has no body cells");
    return mask;
}

BodyMask load_mask(const std::filesystem::path& path, int nx, int ny) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read mask file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_pgm(buffer.str(), nx, ny, path.string());
}

std::string to_pgm(const BodyMask& mask) {
    std::ostringstream out;
    out << "P2\n" << mask.nx << ' ' << mask.ny << "\n255\n";
    for (int j = mask.ny - 1; j >= 0; --j) {
        for (int i = 0; i < mask.nx; ++i) {
            out << (mask.at(i, j) ? 255 : 0) << (i + 1 < mask.nx ? ' ' : '\n');
        }
    }
    return out.str();
}

}  // namespace morphogen
