#pragma once

#include "morphogen/optimizer.hpp"

#include <string>

namespace morphogen {

struct RenderOptions {
    double pixels_per_cm = 20.0;
    double margin_cm = 1.0;
    bool draw_voids = true;
    bool draw_muscles = true;
};

/// SVG 1.1 of one attempt: one square per alive particle (grey by mass, tinted red
/// for the sine channel and blue for cosine by amplitude), void outlines, dashed
/// muscle outlines, and the CoM trace. Byte-identical for identical input.
std::string render_svg(const AttemptRecord& record, const RenderOptions& options = {});

}  // namespace morphogen
