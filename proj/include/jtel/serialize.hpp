// JSON views of report types.
#pragma once

#include <json.hpp>

#include "jtel/density_result.hpp"
#include "jtel/martingale.hpp"
#include "jtel/simulate.hpp"

namespace jtel {

inline nlohmann::json to_json(const mc::McEstimate& e) {
    return {{"value", e.value}, {"std_error", e.std_error}, {"n_paths", e.n_paths}};
}

namespace martingale {

inline nlohmann::json to_json(const BalanceReport& report) {
    return {{"grid", report.grid},
            {"residual_0", report.residuals[0]},
            {"residual_1", report.residuals[1]},
            {"max_abs_residual", report.max_abs_residual},
            {"tolerance", report.tolerance},
            {"is_martingale", report.is_martingale},
            {"sign_violations", {report.sign_violations[0], report.sign_violations[1]}}};
}

}  // namespace martingale

inline nlohmann::json to_json(const DensityResult& d) {
    nlohmann::json out{{"atom_location", d.atom_location},
                       {"atom_mass", d.atom_mass},
                       {"atom_dispersion", d.atom_dispersion},
                       {"mass_below", d.mass_below},
                       {"mass_above", d.mass_above},
                       {"covers_support", d.covers_support},
                       {"closed_form_exact", d.closed_form_exact},
                       {"continuous_mass", d.continuous_mass()},
                       {"total_mass", d.total_mass()}};
    return out;
}

}  // namespace jtel
