// vli: profile -> compress -> simulate pipeline driver.
//
// Exit codes: 0 success, 2 input/config error, 3 compression error,
// 4 simulation fault.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "vli/codec.hpp"
#include "vli/energy.hpp"
#include "vli/frontend_sim.hpp"
#include "vli/interp.hpp"
#include "vli/isa.hpp"
#include "vli/profile.hpp"

namespace {

using namespace vli;

struct RunConfig {
    // front-end
    uint32_t icache_bytes = 16 * 1024;
    uint32_t line_bytes = 32;
    uint32_t miss_latency = 10;
    uint32_t btb_entries = 64;
    uint32_t mispredict_penalty = 3;
    bool depack_full_bypass = false;
    // energy
    double e_icache_access = 3.0;
    double e_btb_access = 1.0;
    double e_depack_cycle = 0.2;
    double e_fetch_cycle = 0.1;
    // workload
    uint64_t seed = 1;
    uint64_t step_limit = 10'000'000;
    // scheme layout: register-index bits of the re-splittable payloads
    uint32_t lw_reg_bits = 2;
    uint32_t addiu_reg_bits = 3;
    uint32_t sw_reg_bits = 2;
    uint32_t sll_reg_bits = 2;

    SimConfig sim() const {
        SimConfig s;
        s.icache_bytes = icache_bytes;
        s.line_bytes = line_bytes;
        s.miss_latency = miss_latency;
        s.btb_entries = btb_entries;
        s.mispredict_penalty = mispredict_penalty;
        s.depack_full_bypass = depack_full_bypass;
        return s;
    }
    EnergyParams energy() const {
        return {e_icache_access, e_btb_access, e_depack_cycle, e_fetch_cycle};
    }
    SchemeLayout layout() const {
        SchemeLayout l = SchemeLayout::default_layout();
        auto resplit = [&](Mnemonic m, uint32_t reg_bits, uint32_t payload) {
            if (reg_bits > payload)
                throw ConfigError(std::string(mnemonic_name(m)) + " register bits exceed payload");
            l.shapes[m] = {static_cast<uint8_t>(reg_bits),
                           static_cast<uint8_t>(payload - reg_bits), true};
        };
        resplit(Mnemonic::LW, lw_reg_bits, 5);
        resplit(Mnemonic::ADDIU, addiu_reg_bits, 5);
        resplit(Mnemonic::SW, sw_reg_bits, 4);
        resplit(Mnemonic::SLL, sll_reg_bits, 4);
        l.validate();
        return l;
    }

    std::string dump() const {
        std::ostringstream out;
        out << "icache_bytes=" << icache_bytes << " line_bytes=" << line_bytes
            << " miss_latency=" << miss_latency << " btb_entries=" << btb_entries
            << " mispredict_penalty=" << mispredict_penalty
            << " depack_full_bypass=" << (depack_full_bypass ? 1 : 0)
            << " e_icache_access=" << e_icache_access << " e_btb_access=" << e_btb_access
            << " e_depack_cycle=" << e_depack_cycle << " e_fetch_cycle=" << e_fetch_cycle
            << " seed=" << seed << " step_limit=" << step_limit
            << " lw_reg_bits=" << lw_reg_bits << " addiu_reg_bits=" << addiu_reg_bits
            << " sw_reg_bits=" << sw_reg_bits << " sll_reg_bits=" << sll_reg_bits;
        return out.str();
    }

    void set(const std::string& key, const std::string& value) {
        auto u32 = [&] { return static_cast<uint32_t>(std::stoul(value)); };
        auto u64 = [&] { return std::stoull(value); };
        auto f64 = [&] { return std::stod(value); };
        if (key == "icache_bytes") icache_bytes = u32();
        else if (key == "line_bytes") line_bytes = u32();
        else if (key == "miss_latency") miss_latency = u32();
        else if (key == "btb_entries") btb_entries = u32();
        else if (key == "mispredict_penalty") mispredict_penalty = u32();
        else if (key == "depack_full_bypass") depack_full_bypass = u32() != 0;
        else if (key == "e_icache_access") e_icache_access = f64();
        else if (key == "e_btb_access") e_btb_access = f64();
        else if (key == "e_depack_cycle") e_depack_cycle = f64();
        else if (key == "e_fetch_cycle") e_fetch_cycle = f64();
        else if (key == "seed") seed = u64();
        else if (key == "step_limit") step_limit = u64();
        else if (key == "lw_reg_bits") lw_reg_bits = u32();
        else if (key == "addiu_reg_bits") addiu_reg_bits = u32();
        else if (key == "sw_reg_bits") sw_reg_bits = u32();
        else if (key == "sll_reg_bits") sll_reg_bits = u32();
        else throw ConfigError("unknown config key '" + key + "'");
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config file " + path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            auto eq = line.find('=');
            if (eq == std::string::npos) {
                std::istringstream check(line);
                std::string leftover;
                if (check >> leftover) throw ParseError("expected key=value", line_no);
                continue;
            }
            auto trim = [](std::string s) {
                auto b = s.find_first_not_of(" \t");
                auto e = s.find_last_not_of(" \t");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            try {
                set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
            } catch (const std::invalid_argument&) {
                throw ParseError("bad value for '" + trim(line.substr(0, eq)) + "'", line_no);
            }
        }
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("failed to write " + path);
}

// Trace files carry one executed instruction per line in assembly form.
std::vector<Instruction> load_trace_file(const std::string& path) {
    std::string text = read_file(path);
    std::vector<Instruction> trace;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string line =
            text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream check(line);
        std::string any;
        if (!(check >> any)) continue;
        trace.push_back(parse_asm(line, 0, nullptr, line_no));
    }
    if (trace.empty()) throw Error("trace file " + path + " holds no instructions");
    return trace;
}

std::string coverage_text(const Profile& profile, const EncodingScheme& scheme) {
    CoverageReport report = coverage(profile, scheme);
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    for (const auto& [m, frac] : report.per_mnemonic)
        out << "coverage " << mnemonic_name(m) << ' ' << frac * 100.0 << "%\n";
    out << "coverage total " << report.total * 100.0 << "%\n";
    return out.str();
}

int cmd_profile(const std::string& trace_path, const std::string& freqs_path,
                const std::string& out_path, const std::string& scheme_path,
                const RunConfig& config) {
    Profile profile;
    if (!freqs_path.empty())
        profile = profile_from_freqs(parse_freq_table(read_file(freqs_path)));
    else
        profile = build_profile(load_trace_file(trace_path));

    std::string text = format_profile(profile);
    if (out_path.empty())
        std::cout << text;
    else
        write_file(out_path, text);

    EncodingScheme scheme = build_scheme(profile, config.layout());
    std::cout << coverage_text(profile, scheme);
    if (!scheme_path.empty()) write_file(scheme_path, dump_scheme(scheme));
    return 0;
}

int cmd_compress(const std::string& program_path, const std::string& profile_path,
                 const std::string& out_path, const std::string& scheme_path,
                 const RunConfig& config) {
    Program program = parse_program(read_file(program_path));
    Profile profile = parse_profile(read_file(profile_path));
    EncodingScheme scheme = build_scheme(profile, config.layout());
    if (!scheme_path.empty()) write_file(scheme_path, dump_scheme(scheme));

    CompressedImage image = compress(program, scheme);
    save_image_file(image, out_path);
    std::cout << format_scan(static_scan(image));
    return 0;
}

int cmd_disasm(const std::string& image_path, const std::string& out_path) {
    CompressedImage image = load_image_file(image_path);
    std::string text = format_program(decompress(image));
    if (out_path.empty())
        std::cout << text;
    else
        write_file(out_path, text);
    return 0;
}

int run_simulation(const Program& program, const CompressedImage& image, const RunConfig& config,
                   const std::string& out_dir, const std::string& log_path,
                   const std::string& trace_path, bool want_bars) {
    RunResult rr = run(program, {}, config.step_limit);
    if (rr.trace.truncated)
        std::cerr << "warning: trace truncated at " << rr.trace.entries.size()
                  << " instructions\n";
    if (!trace_path.empty()) write_file(trace_path, format_trace(rr.trace));

    std::optional<std::ofstream> log_file;
    std::ostream* log = nullptr;
    if (!log_path.empty()) {
        log_file.emplace(log_path);
        if (!*log_file) throw IoError("cannot open " + log_path + " for writing");
        log = &*log_file;
    }

    SimResult comp = simulate(image, rr.trace, config.sim(), log);
    SimResult base = simulate_baseline(program, rr.trace, config.sim());

    std::filesystem::create_directories(out_dir);
    std::ostringstream metrics;
    metrics << "# " << config.dump() << '\n';
    metrics << metrics_csv_header() << '\n';
    metrics << metrics_csv_row("compressed", comp.metrics) << '\n';
    metrics << metrics_csv_row("baseline", base.metrics) << '\n';
    write_file(out_dir + "/metrics.csv", metrics.str());

    EnergyReport report = compare(comp.metrics, base.metrics, config.energy());
    write_file(out_dir + "/energy.csv", "# " + config.dump() + "\n" + render_energy_csv(report));
    write_file(out_dir + "/energy.txt", render_energy_table(report));
    if (want_bars) write_file(out_dir + "/bars.txt", render_energy_bars(report));

    std::cout << render_energy_table(report);
    return 0;
}

int cmd_simulate(const std::string& image_path, const std::string& program_path,
                 const std::string& mix_path, uint64_t mix_length, const std::string& out_dir,
                 const std::string& log_path, const std::string& trace_path, bool want_bars,
                 const std::string& save_asm, const std::string& save_image_path,
                 const RunConfig& config) {
    Program program;
    CompressedImage image;
    if (!mix_path.empty()) {
        program = gen_mix(parse_freq_table(read_file(mix_path)), mix_length, config.seed);
        EncodingScheme scheme = build_scheme(build_profile(program.code), config.layout());
        image = compress(program, scheme);
        if (!save_asm.empty()) write_file(save_asm, format_program(program));
        if (!save_image_path.empty()) save_image_file(image, save_image_path);
    } else {
        program = parse_program(read_file(program_path));
        image = load_image_file(image_path);
    }
    return run_simulation(program, image, config, out_dir, log_path, trace_path, want_bars);
}

SimMetrics parse_metrics_row(const std::string& row) {
    std::istringstream in(row);
    std::string field;
    std::vector<uint64_t> values;
    bool first = true;
    while (std::getline(in, field, ',')) {
        if (first) {
            first = false;
            continue;
        }
        values.push_back(std::stoull(field));
    }
    if (values.size() != 12) throw ParseError("metrics row needs 12 numeric fields");
    SimMetrics m;
    m.cycles = values[0];
    m.chunk_fetches = values[1];
    m.icache_hits = values[2];
    m.icache_misses = values[3];
    m.btb_lookups = values[4];
    m.depack_cycles = values[5];
    m.pad_skips = values[6];
    m.delivered_instructions = values[7];
    m.stall_cycles_queue_full = values[8];
    m.stall_cycles_miss = values[9];
    m.mispredict_flushes = values[10];
    m.bytes_fetched = values[11];
    return m;
}

int cmd_report(const std::string& metrics_path, const std::string& out_dir, bool want_bars,
               const RunConfig& config) {
    std::istringstream in(read_file(metrics_path));
    std::string line;
    std::optional<SimMetrics> comp, base;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("compressed,", 0) == 0) comp = parse_metrics_row(line);
        if (line.rfind("baseline,", 0) == 0) base = parse_metrics_row(line);
    }
    if (!comp || !base) throw ParseError("metrics file needs 'compressed' and 'baseline' rows");
    EnergyReport report = compare(*comp, *base, config.energy());
    std::cout << render_energy_table(report);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_file(out_dir + "/energy.csv",
                   "# " + config.dump() + "\n" + render_energy_csv(report));
        write_file(out_dir + "/energy.txt", render_energy_table(report));
        if (want_bars) write_file(out_dir + "/bars.txt", render_energy_bars(report));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"variable-length instruction toolchain and front-end simulator"};
    app.require_subcommand(1);

    RunConfig config;
    // The config file loads before flag parsing, so explicit flags override
    // file values.
    for (int k = 1; k + 1 < argc; ++k) {
        if (std::string(argv[k]) == "--config") {
            try {
                config.load_file(argv[k + 1]);
            } catch (const Error& e) {
                std::cerr << "error: " << e.what() << '\n';
                return 2;
            }
            break;
        }
    }
    std::string config_path;
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--icache-bytes", config.icache_bytes, "instruction cache size");
    app.add_option("--line-bytes", config.line_bytes, "cache line size");
    app.add_option("--miss-latency", config.miss_latency, "cache miss penalty in cycles");
    app.add_option("--btb-entries", config.btb_entries, "branch target buffer entries");
    app.add_option("--penalty", config.mispredict_penalty, "mispredict penalty in cycles");
    app.add_flag("--depack-bypass", config.depack_full_bypass,
                 "full words skip the depack cycle charge");
    app.add_option("--seed", config.seed, "random seed");
    app.add_option("--step-limit", config.step_limit, "interpreter step limit");
    app.add_option("--e-icache", config.e_icache_access, "energy per cache access");
    app.add_option("--e-btb", config.e_btb_access, "energy per btb lookup");
    app.add_option("--e-depack", config.e_depack_cycle, "energy per depack cycle");
    app.add_option("--e-fetch", config.e_fetch_cycle, "energy per fetch cycle");
    app.add_option("--lw-reg-bits", config.lw_reg_bits, "LW register-index bits (of 5)");
    app.add_option("--addiu-reg-bits", config.addiu_reg_bits, "ADDIU register-index bits (of 5)");
    app.add_option("--sw-reg-bits", config.sw_reg_bits, "SW register-index bits (of 4)");
    app.add_option("--sll-reg-bits", config.sll_reg_bits, "SLL register-index bits (of 4)");

    // profile
    auto* prof = app.add_subcommand("profile", "count opcode/argument usage in a trace");
    prof->fallthrough();
    std::string trace_path, freqs_path, out_path, scheme_path;
    prof->add_option("--trace", trace_path, "trace file, one executed instruction per line");
    prof->add_option("--from-freqs", freqs_path, "synthesize from a 'MNEMONIC percent' table");
    prof->add_option("--out", out_path, "profile output file (default stdout)");
    prof->add_option("--dump-scheme", scheme_path, "write the derived lookup tables");

    // compress
    auto* comp = app.add_subcommand("compress", "encode a program against a profile");
    comp->fallthrough();
    std::string program_path, profile_path, image_out;
    comp->add_option("--program", program_path, "assembly program")->required();
    comp->add_option("--profile", profile_path, "profile file from 'vli profile'")->required();
    comp->add_option("--out", image_out, "image output file")->required();
    comp->add_option("--dump-scheme", scheme_path, "write the derived lookup tables");

    // disasm
    auto* dis = app.add_subcommand("disasm", "decode an image back to assembly");
    dis->fallthrough();
    std::string image_path, disasm_out;
    dis->add_option("--image", image_path, "image file")->required();
    dis->add_option("--out", disasm_out, "listing output file (default stdout)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run both front-end models over a trace");
    sim->fallthrough();
    std::string sim_image, sim_program, mix_path, out_dir = "out", log_path, trace_out;
    std::string save_asm, save_image_path;
    uint64_t mix_length = 100000;
    bool want_bars = false;
    sim->add_option("--image", sim_image, "compressed image");
    sim->add_option("--program", sim_program, "matching assembly program");
    sim->add_option("--mix", mix_path, "generate a synthetic mix from a frequency table");
    sim->add_option("--length", mix_length, "mix length in instructions");
    sim->add_option("--out-dir", out_dir, "output directory");
    sim->add_option("--log", log_path, "per-cycle log file");
    sim->add_option("--trace-out", trace_out, "dynamic trace dump");
    sim->add_option("--save-asm", save_asm, "write the generated mix program");
    sim->add_option("--save-image", save_image_path, "write the generated mix image");
    sim->add_flag("--bars", want_bars, "also emit plot-ready bar data");

    // report
    auto* rep = app.add_subcommand("report", "re-render energy from a metrics file");
    rep->fallthrough();
    std::string metrics_path, report_dir;
    rep->add_option("--metrics", metrics_path, "metrics.csv from 'vli simulate'")->required();
    rep->add_option("--out-dir", report_dir, "output directory (default stdout only)");
    rep->add_flag("--bars", want_bars, "also emit plot-ready bar data");

    CLI11_PARSE(app, argc, argv);

    try {
        if (prof->parsed()) {
            if (trace_path.empty() == freqs_path.empty())
                throw ConfigError("profile needs exactly one of --trace / --from-freqs");
            return cmd_profile(trace_path, freqs_path, out_path, scheme_path, config);
        }
        if (comp->parsed())
            return cmd_compress(program_path, profile_path, image_out, scheme_path, config);
        if (dis->parsed()) return cmd_disasm(image_path, disasm_out);
        if (sim->parsed()) {
            if (mix_path.empty() && (sim_image.empty() || sim_program.empty()))
                throw ConfigError("simulate needs --mix or both --image and --program");
            return cmd_simulate(sim_image, sim_program, mix_path, mix_length, out_dir, log_path,
                                trace_out, want_bars, save_asm, save_image_path, config);
        }
        if (rep->parsed()) return cmd_report(metrics_path, report_dir, want_bars, config);
    } catch (const CompressError& e) {
        std::cerr << "compression error: " << e.what() << '\n';
        return 3;
    } catch (const SimFault& e) {
        std::cerr << "simulation fault: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
