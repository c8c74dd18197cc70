#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vli/isa.hpp"

namespace vli {

struct EncodingScheme; // codec.hpp

// Register-operand tuple of one instruction, in per-mnemonic canonical order:
// LW/SW/ADDIU/ORI (rt, rs); SLL (rd, rt); ADDU/SLT (rd, rs, rt);
// BEQ/BNE (rs, rt); LUI (rt); JR (rs); NOP/HALT/J ().
struct RegCombo {
    std::array<uint8_t, 3> regs{};
    uint8_t arity = 0;

    // Ordering key; distinct tuples always pack to distinct values.
    uint32_t packed() const {
        return (static_cast<uint32_t>(regs[0]) << 10) | (static_cast<uint32_t>(regs[1]) << 5) |
               regs[2];
    }
    bool operator==(const RegCombo&) const = default;
    auto operator<=>(const RegCombo& o) const { return packed() <=> o.packed(); }
};

RegCombo reg_combo_of(const Instruction& instr);
// Applies a register tuple back onto an instruction skeleton of mnemonic m.
void apply_reg_combo(Instruction& instr, const RegCombo& combo);

// The profiled "immediate" of an instruction: imm for I-formats, the shift
// amount for SLL, nothing for register-only / jump formats.
std::optional<int16_t> imm_of(const Instruction& instr);
void apply_imm(Instruction& instr, int16_t imm);
bool format_has_imm(Mnemonic m);

// Dynamic execution counts. Argument statistics are kept per full argument
// tuple (register combination + immediate together) so coverage can test
// per-instruction residency; register and immediate marginals are derived.
struct Profile {
    struct ArgKey {
        uint32_t packed_regs = 0;
        int32_t imm_pattern = -1; // 0..65535, or -1 when the format has no immediate
        auto operator<=>(const ArgKey&) const = default;
    };

    std::map<Mnemonic, uint64_t> opcode_counts;
    std::map<Mnemonic, std::map<ArgKey, uint64_t>> arg_counts;
    uint64_t total = 0;

    // count per register combination (packed), descending by count is left
    // to the caller
    std::map<uint32_t, uint64_t> reg_marginal(Mnemonic m) const;
    std::map<uint16_t, uint64_t> imm_marginal(Mnemonic m) const;

    // Checks the counting invariants; throws Error on violation.
    void validate() const;
};

Profile build_profile(std::span<const Instruction> trace);

// Frequency-table profiles, used to reproduce published instruction mixes
// without a trace. Frequencies are integer basis points (1 bp = 0.01%);
// each listed mnemonic gets a single synthetic argument tuple, and any
// remainder up to 100% is assigned to ORI (full-length only).
using FreqTable = std::vector<std::pair<Mnemonic, uint32_t>>;

Profile profile_from_freqs(const FreqTable& freqs_bp);

// Parses `MNEMONIC percent` lines, e.g. "LW 10.40" -> 1040 bp. Exact decimal
// parsing, at most two fraction digits.
FreqTable parse_freq_table(std::string_view text);

// --- lookup tables ----------------------------------------------------------

// The seven mnemonics with short encodings, in serialization order.
std::span<const Mnemonic> short_eligible_mnemonics();
bool is_short_eligible(Mnemonic m);

// Index-field widths of one short code. reg/imm widths must fill the code's
// payload budget exactly (LW/ADDIU: 5 bits, SW/SLL/ADDU: 4, BEQ/BNE: 2 plus
// an inline displacement byte). ADDU/BEQ/BNE have no immediate table.
struct LutShape {
    uint8_t reg_bits = 0;
    uint8_t imm_bits = 0;
    bool has_imm_table = false;

    uint32_t reg_capacity() const { return 1u << reg_bits; }
    uint32_t imm_capacity() const { return has_imm_table ? (1u << imm_bits) : 0; }
    bool operator==(const LutShape&) const = default;
};

struct SchemeLayout {
    std::map<Mnemonic, LutShape> shapes;

    static SchemeLayout default_layout();
    const LutShape& shape(Mnemonic m) const;
    void validate() const; // throws ConfigError
    bool operator==(const SchemeLayout&) const = default;
};

// Argument lookup tables. Entry order is the LUT index order (descending
// frequency, ties to the smaller packed value).
struct LutSet {
    struct Tables {
        std::vector<RegCombo> regs;
        std::vector<int16_t> imms;
        bool operator==(const Tables&) const = default;
    };
    std::map<Mnemonic, Tables> tables;

    std::optional<uint32_t> reg_index(Mnemonic m, const RegCombo& combo) const;
    std::optional<uint32_t> imm_index(Mnemonic m, int16_t imm) const;
    bool operator==(const LutSet&) const = default;
};

// Fills each LUT with the top-capacity most frequent argument tuples.
// Deterministic: ties break toward the smaller packed/raw value.
EncodingScheme build_scheme(const Profile& profile, const SchemeLayout& layout);

struct CoverageReport {
    double total = 0.0;
    std::map<Mnemonic, double> per_mnemonic;
};

// Fraction of dynamic instructions whose mnemonic is short-eligible and whose
// register combination and immediate (when the scheme keeps an immediate
// table) are both LUT-resident.
CoverageReport coverage(const Profile& profile, const EncodingScheme& scheme);

// Stable text forms.
std::string format_profile(const Profile& profile);
Profile parse_profile(std::string_view text);
std::string dump_scheme(const EncodingScheme& scheme);

} // namespace vli
