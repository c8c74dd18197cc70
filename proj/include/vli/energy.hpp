#pragma once

#include <optional>
#include <string>

#include "vli/errors.hpp"
#include "vli/frontend_sim.hpp"

namespace vli {

// Per-event energies in abstract units. The defaults keep the fetch path at
// a 75:25 icache:btb split; the absolute values are illustrative knobs, not
// measurements.
struct EnergyParams {
    double e_icache_access = 3.0;
    double e_btb_access = 1.0;
    double e_depack_cycle = 0.2;
    double e_fetch_cycle = 0.1;

    void validate() const {
        if (e_icache_access < 0 || e_btb_access < 0 || e_depack_cycle < 0 || e_fetch_cycle < 0)
            throw ConfigError("energy parameters must be non-negative");
    }
};

struct ComponentEnergy {
    double icache = 0;
    double btb = 0;
    double depack = 0;
    double fetch = 0;
    double total() const { return icache + btb + depack + fetch; }
};

// Linear event model:
//   icache = e_icache_access * chunk_fetches
//   btb    = e_btb_access    * btb_lookups
//   depack = e_depack_cycle  * depack_cycles
//   fetch  = e_fetch_cycle   * (chunk_fetches + stall cycles)
ComponentEnergy account(const SimMetrics& metrics, const EnergyParams& params);

struct EnergyReport {
    ComponentEnergy compressed;
    ComponentEnergy baseline;
    double relative_total = 0.0; // compressed.total / baseline.total
    // per-component compressed/baseline ratio; absent when the baseline
    // component is zero (the baseline has no depack stage)
    std::optional<double> rel_icache, rel_btb, rel_depack, rel_fetch;
    bool compressed_wins = false;
};

// Throws Error when the two runs did not deliver the same instruction count.
EnergyReport compare(const SimMetrics& compressed, const SimMetrics& baseline,
                     const EnergyParams& params);

std::string render_energy_table(const EnergyReport& report);
std::string render_energy_csv(const EnergyReport& report);
// `component relative-fraction` lines (fractions of the baseline total),
// ready for external plotting.
std::string render_energy_bars(const EnergyReport& report);

} // namespace vli
