#include "vli/energy.hpp"

#include <iomanip>
#include <sstream>

namespace vli {

ComponentEnergy account(const SimMetrics& m, const EnergyParams& p) {
    p.validate();
    ComponentEnergy e;
    e.icache = p.e_icache_access * static_cast<double>(m.chunk_fetches);
    e.btb = p.e_btb_access * static_cast<double>(m.btb_lookups);
    e.depack = p.e_depack_cycle * static_cast<double>(m.depack_cycles);
    e.fetch = p.e_fetch_cycle * static_cast<double>(m.chunk_fetches + m.stall_cycles_queue_full +
                                                    m.stall_cycles_miss);
    return e;
}

EnergyReport compare(const SimMetrics& compressed, const SimMetrics& baseline,
                     const EnergyParams& params) {
    if (compressed.delivered_instructions != baseline.delivered_instructions)
        throw Error("energy comparison over different instruction streams (" +
                    std::to_string(compressed.delivered_instructions) + " vs " +
                    std::to_string(baseline.delivered_instructions) + " delivered)");
    EnergyReport r;
    r.compressed = account(compressed, params);
    r.baseline = account(baseline, params);
    auto ratio = [](double num, double den) -> std::optional<double> {
        if (den == 0.0) return std::nullopt;
        return num / den;
    };
    r.rel_icache = ratio(r.compressed.icache, r.baseline.icache);
    r.rel_btb = ratio(r.compressed.btb, r.baseline.btb);
    r.rel_depack = ratio(r.compressed.depack, r.baseline.depack);
    r.rel_fetch = ratio(r.compressed.fetch, r.baseline.fetch);
    r.relative_total = r.baseline.total() == 0.0 ? 0.0 : r.compressed.total() / r.baseline.total();
    r.compressed_wins = r.compressed.total() < r.baseline.total();
    return r;
}

namespace {

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << v;
    return ss.str();
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt(*v) : std::string("n/a");
}

} // namespace

std::string render_energy_table(const EnergyReport& r) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "component" << std::right << std::setw(14) << "compressed"
        << std::setw(14) << "baseline" << std::setw(12) << "relative" << '\n';
    auto row = [&](const char* name, double c, double b, const std::optional<double>& rel) {
        out << std::left << std::setw(10) << name << std::right << std::setw(14) << fmt(c)
            << std::setw(14) << fmt(b) << std::setw(12) << fmt_opt(rel) << '\n';
    };
    row("icache", r.compressed.icache, r.baseline.icache, r.rel_icache);
    row("btb", r.compressed.btb, r.baseline.btb, r.rel_btb);
    row("depack", r.compressed.depack, r.baseline.depack, r.rel_depack);
    row("fetch", r.compressed.fetch, r.baseline.fetch, r.rel_fetch);
    row("total", r.compressed.total(), r.baseline.total(), r.relative_total);
    out << (r.compressed_wins ? "compressed front-end uses less energy\n"
                              : "compressed front-end does not win under these parameters\n");
    return out.str();
}

std::string render_energy_csv(const EnergyReport& r) {
    std::ostringstream out;
    out << "component,compressed,baseline,relative\n";
    auto row = [&](const char* name, double c, double b, const std::optional<double>& rel) {
        out << name << ',' << fmt(c) << ',' << fmt(b) << ',' << fmt_opt(rel) << '\n';
    };
    row("icache", r.compressed.icache, r.baseline.icache, r.rel_icache);
    row("btb", r.compressed.btb, r.baseline.btb, r.rel_btb);
    row("depack", r.compressed.depack, r.baseline.depack, r.rel_depack);
    row("fetch", r.compressed.fetch, r.baseline.fetch, r.rel_fetch);
    row("total", r.compressed.total(), r.baseline.total(),
        std::optional<double>(r.relative_total));
    return out.str();
}

std::string render_energy_bars(const EnergyReport& r) {
    double base_total = r.baseline.total();
    auto frac = [&](double v) { return base_total == 0.0 ? 0.0 : v / base_total; };
    std::ostringstream out;
    out << "icache " << fmt(frac(r.compressed.icache)) << '\n';
    out << "btb " << fmt(frac(r.compressed.btb)) << '\n';
    out << "depack " << fmt(frac(r.compressed.depack)) << '\n';
    out << "fetch " << fmt(frac(r.compressed.fetch)) << '\n';
    out << "total " << fmt(frac(r.compressed.total())) << '\n';
    return out.str();
}

} // namespace vli
