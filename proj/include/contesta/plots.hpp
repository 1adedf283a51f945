#pragma once

#include <string>

#include "contesta/global_explain.hpp"
#include "contesta/local_explain.hpp"

// Static SVG renderings of the explanation artifacts. Output is a pure
// function of the input: numbers are printed with fixed precision and no
// timestamps or random ids are embedded.
namespace contesta::plots {

inline constexpr const char* kQueryColor = "#d62728";    // red
inline constexpr const char* kLosNecColor = "#8e44ad";   // violet
inline constexpr const char* kHealthyColor = "#2ca02c";  // green
inline constexpr const char* kBoundaryColor = "#888888"; // gray

// Horizontal bars, most important on top.
std::string importance_svg(const ImportanceReport& report);

// Partial dependence line with a rug of observed values.
std::string pdp_svg(const PdpCurve& curve);

// Heat map of the surface with a risk color bar.
std::string pdp_surface_svg(const PdpSurface& surface);

// One scatter panel per feature: neighbors by latent distance (x) against
// the feature value (y), the query at distance 0, boundary as a gray line.
std::string contest_svg(const ContestReport& report);

// Maps t in [0, 1] to a hex color on the risk scale (low = pale, high = dark red).
std::string risk_color(double t);

}  // namespace contesta::plots
