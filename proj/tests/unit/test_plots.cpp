#include <doctest.h>

#include "contesta/plots.hpp"
#include "contesta/synth.hpp"

using namespace contesta;

namespace {

struct Fixture {
  Cohort cohort = prune_multicollinearity(synth_cohort(SynthConfig{})).cohort;
  TrainedModel model = fit_fixed(Algorithm::RandomForest, RandomForestHypers{60, 2, 1}, cohort, 5);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

bool well_formed(const std::string& svg) {
  return svg.find("<svg") != std::string::npos && svg.find("</svg>") != std::string::npos;
}

}  // namespace

TEST_SUITE("plots") {
  TEST_CASE("importance and PDP plots are deterministic SVG") {
    const auto& f = fixture();
    const auto imp = permutation_importance(f.model, f.cohort, 3, 1);
    CHECK(well_formed(plots::importance_svg(imp)));
    CHECK(plots::importance_svg(imp) == plots::importance_svg(permutation_importance(f.model, f.cohort, 3, 1)));
    const auto curve = pdp_1d(f.model, Feature::Xc, f.cohort, 11);
    CHECK(well_formed(plots::pdp_svg(curve)));
    CHECK(plots::pdp_svg(curve) == plots::pdp_svg(pdp_1d(f.model, Feature::Xc, f.cohort, 11)));
    const auto surf = pdp_2d(f.model, Feature::W, Feature::Xc, f.cohort, 5, 5);
    const auto svg = plots::pdp_surface_svg(surf);
    CHECK(well_formed(svg));
    CHECK(svg == plots::pdp_surface_svg(surf));
  }

  TEST_CASE("contest panels use the legend colors") {
    const auto& f = fixture();
    const auto rep = contest(f.cohort.records()[0], f.model, "m", f.cohort, LatentSpaceConfig{});
    const auto svg = plots::contest_svg(rep);
    CHECK(well_formed(svg));
    CHECK(svg.find(plots::kQueryColor) != std::string::npos);
    CHECK(svg.find(plots::kLosNecColor) != std::string::npos);
    CHECK(svg.find(plots::kHealthyColor) != std::string::npos);
    if (rep.panels[0].boundary.boundary || rep.panels[1].boundary.boundary)
      CHECK(svg.find(plots::kBoundaryColor) != std::string::npos);
    CHECK(svg == plots::contest_svg(contest(f.cohort.records()[0], f.model, "m", f.cohort, LatentSpaceConfig{})));
  }

  TEST_CASE("risk scale runs from pale to dark") {
    const auto lo = plots::risk_color(0.0), hi = plots::risk_color(1.0);
    CHECK(lo.size() == 7);
    CHECK(hi.size() == 7);
    CHECK(lo != hi);
    CHECK(plots::risk_color(-1.0) == lo);
    CHECK(plots::risk_color(2.0) == hi);
    // Darker means a smaller channel sum.
    auto sum = [](const std::string& c) {
      return std::stoi(c.substr(1, 2), nullptr, 16) + std::stoi(c.substr(3, 2), nullptr, 16) +
             std::stoi(c.substr(5, 2), nullptr, 16);
    };
    CHECK(sum(hi) < sum(plots::risk_color(0.5)));
    CHECK(sum(plots::risk_color(0.5)) < sum(lo));
  }
}
