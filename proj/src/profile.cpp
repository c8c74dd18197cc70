#include "vli/profile.hpp"

#include <algorithm>
#include <sstream>

#include "vli/codec.hpp"

namespace vli {

RegCombo reg_combo_of(const Instruction& i) {
    RegCombo c;
    auto set = [&](uint8_t a, uint8_t b = 0, uint8_t d = 0, uint8_t arity = 0) {
        c.regs = {a, b, d};
        c.arity = arity;
    };
    switch (format_of(i.op)) {
    case Format::Mem:
    case Format::ArithImm:
        set(i.rt, i.rs, 0, 2);
        break;
    case Format::Shift:
        set(i.rd, i.rt, 0, 2);
        break;
    case Format::Reg3:
        set(i.rd, i.rs, i.rt, 3);
        break;
    case Format::Branch:
        set(i.rs, i.rt, 0, 2);
        break;
    case Format::LoadUpper:
        set(i.rt, 0, 0, 1);
        break;
    case Format::JumpReg:
        set(i.rs, 0, 0, 1);
        break;
    case Format::None:
    case Format::Jump:
        break;
    }
    return c;
}

void apply_reg_combo(Instruction& i, const RegCombo& c) {
    switch (format_of(i.op)) {
    case Format::Mem:
    case Format::ArithImm:
        i.rt = c.regs[0];
        i.rs = c.regs[1];
        break;
    case Format::Shift:
        i.rd = c.regs[0];
        i.rt = c.regs[1];
        break;
    case Format::Reg3:
        i.rd = c.regs[0];
        i.rs = c.regs[1];
        i.rt = c.regs[2];
        break;
    case Format::Branch:
        i.rs = c.regs[0];
        i.rt = c.regs[1];
        break;
    case Format::LoadUpper:
        i.rt = c.regs[0];
        break;
    case Format::JumpReg:
        i.rs = c.regs[0];
        break;
    case Format::None:
    case Format::Jump:
        break;
    }
}

bool format_has_imm(Mnemonic m) {
    switch (format_of(m)) {
    case Format::Mem:
    case Format::ArithImm:
    case Format::LoadUpper:
    case Format::Branch:
    case Format::Shift: // the shift amount plays the immediate role
        return true;
    default:
        return false;
    }
}

std::optional<int16_t> imm_of(const Instruction& i) {
    if (!format_has_imm(i.op)) return std::nullopt;
    if (i.op == Mnemonic::SLL) return static_cast<int16_t>(i.shamt);
    return i.imm;
}

void apply_imm(Instruction& i, int16_t imm) {
    if (i.op == Mnemonic::SLL)
        i.shamt = static_cast<uint8_t>(imm & 0x1f);
    else
        i.imm = imm;
}

namespace {

Profile::ArgKey arg_key_of(const Instruction& i) {
    Profile::ArgKey key;
    key.packed_regs = reg_combo_of(i).packed();
    auto imm = imm_of(i);
    key.imm_pattern = imm ? static_cast<int32_t>(static_cast<uint16_t>(*imm)) : -1;
    return key;
}

} // namespace

std::map<uint32_t, uint64_t> Profile::reg_marginal(Mnemonic m) const {
    std::map<uint32_t, uint64_t> out;
    auto it = arg_counts.find(m);
    if (it == arg_counts.end()) return out;
    for (const auto& [key, count] : it->second) out[key.packed_regs] += count;
    return out;
}

std::map<uint16_t, uint64_t> Profile::imm_marginal(Mnemonic m) const {
    std::map<uint16_t, uint64_t> out;
    auto it = arg_counts.find(m);
    if (it == arg_counts.end()) return out;
    for (const auto& [key, count] : it->second) {
        if (key.imm_pattern >= 0) out[static_cast<uint16_t>(key.imm_pattern)] += count;
    }
    return out;
}

void Profile::validate() const {
    uint64_t sum = 0;
    for (const auto& [m, count] : opcode_counts) sum += count;
    if (sum != total) throw Error("profile: opcode counts do not sum to total");
    for (const auto& [m, args] : arg_counts) {
        uint64_t asum = 0;
        for (const auto& [key, count] : args) asum += count;
        auto it = opcode_counts.find(m);
        uint64_t expect = it == opcode_counts.end() ? 0 : it->second;
        if (asum != expect)
            throw Error("profile: argument counts for " + std::string(mnemonic_name(m)) +
                        " do not sum to its opcode count");
    }
}

Profile build_profile(std::span<const Instruction> trace) {
    if (trace.empty()) throw Error("build_profile: empty trace");
    Profile p;
    p.total = trace.size();
    for (const Instruction& i : trace) {
        p.opcode_counts[i.op]++;
        p.arg_counts[i.op][arg_key_of(i)]++;
    }
    p.validate();
    return p;
}

Profile profile_from_freqs(const FreqTable& freqs_bp) {
    constexpr uint32_t kFullScale = 10000; // basis points per 100%
    uint64_t listed = 0;
    for (const auto& [m, bp] : freqs_bp) {
        if (is_branch_class(m) && m != Mnemonic::BEQ && m != Mnemonic::BNE)
            throw ConfigError("frequency table may not contain J/JR");
        if (m == Mnemonic::HALT) throw ConfigError("frequency table may not contain HALT");
        listed += bp;
    }
    if (listed > kFullScale) throw ConfigError("frequencies exceed 100%");

    Profile p;
    p.total = kFullScale;
    auto add = [&](Mnemonic m, uint64_t count) {
        if (count == 0) return;
        Instruction skeleton;
        skeleton.op = m;
        // One synthetic argument tuple per mnemonic: registers 1,2,3 as the
        // format needs them, immediate 0.
        RegCombo combo = reg_combo_of(skeleton);
        for (uint8_t k = 0; k < combo.arity; ++k) combo.regs[k] = static_cast<uint8_t>(k + 1);
        apply_reg_combo(skeleton, combo);
        p.opcode_counts[m] += count;
        p.arg_counts[m][arg_key_of(skeleton)] += count;
    };
    for (const auto& [m, bp] : freqs_bp) add(m, bp);
    add(Mnemonic::ORI, kFullScale - listed);
    p.validate();
    return p;
}

FreqTable parse_freq_table(std::string_view text) {
    FreqTable table;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        std::istringstream ss{std::string(line)};
        std::string name, percent;
        if (!(ss >> name)) continue;
        if (!(ss >> percent)) throw ParseError("missing percentage", line_no);
        auto m = mnemonic_from_name(name);
        if (!m) throw ParseError("unknown mnemonic '" + name + "'", line_no);

        // Exact decimal parse: up to two fraction digits, in basis points.
        auto dot = percent.find('.');
        std::string whole = dot == std::string::npos ? percent : percent.substr(0, dot);
        std::string frac = dot == std::string::npos ? "" : percent.substr(dot + 1);
        if (frac.size() > 2) throw ParseError("at most two fraction digits", line_no);
        while (frac.size() < 2) frac += '0';
        for (char c : whole + frac)
            if (!std::isdigit(static_cast<unsigned char>(c)))
                throw ParseError("bad percentage '" + percent + "'", line_no);
        uint32_t bp = static_cast<uint32_t>(std::stoul(whole.empty() ? "0" : whole) * 100 +
                                            std::stoul(frac));
        table.emplace_back(*m, bp);
    }
    return table;
}

// --- lookup tables ----------------------------------------------------------

namespace {

constexpr std::array<Mnemonic, 7> kShortMnemonics = {
    Mnemonic::LW,  Mnemonic::ADDIU, Mnemonic::SW,  Mnemonic::SLL,
    Mnemonic::ADDU, Mnemonic::BEQ,  Mnemonic::BNE,
};

// Payload bits available after the class prefix in the first byte.
uint8_t payload_bits(Mnemonic m) {
    switch (m) {
    case Mnemonic::LW:
    case Mnemonic::ADDIU:
        return 5;
    case Mnemonic::SW:
    case Mnemonic::SLL:
    case Mnemonic::ADDU:
        return 4;
    case Mnemonic::BEQ:
    case Mnemonic::BNE:
        return 2;
    default:
        return 0;
    }
}

} // namespace

std::span<const Mnemonic> short_eligible_mnemonics() {
    return kShortMnemonics;
}

bool is_short_eligible(Mnemonic m) {
    return std::find(kShortMnemonics.begin(), kShortMnemonics.end(), m) != kShortMnemonics.end();
}

SchemeLayout SchemeLayout::default_layout() {
    SchemeLayout layout;
    // LW keeps the bigger immediate table, ADDIU the bigger register table.
    layout.shapes[Mnemonic::LW] = {2, 3, true};
    layout.shapes[Mnemonic::ADDIU] = {3, 2, true};
    layout.shapes[Mnemonic::SW] = {2, 2, true};
    layout.shapes[Mnemonic::SLL] = {2, 2, true};
    layout.shapes[Mnemonic::ADDU] = {4, 0, false};
    layout.shapes[Mnemonic::BEQ] = {2, 0, false};
    layout.shapes[Mnemonic::BNE] = {2, 0, false};
    return layout;
}

const LutShape& SchemeLayout::shape(Mnemonic m) const {
    auto it = shapes.find(m);
    if (it == shapes.end())
        throw ConfigError("layout has no shape for " + std::string(mnemonic_name(m)));
    return it->second;
}

void SchemeLayout::validate() const {
    for (Mnemonic m : kShortMnemonics) {
        const LutShape& s = shape(m);
        uint8_t budget = payload_bits(m);
        uint8_t imm_bits = s.has_imm_table ? s.imm_bits : 0;
        if (s.reg_bits + imm_bits != budget)
            throw ConfigError("layout for " + std::string(mnemonic_name(m)) + ": " +
                              std::to_string(s.reg_bits) + "+" + std::to_string(imm_bits) +
                              " index bits do not fill the " + std::to_string(budget) +
                              "-bit payload");
        if ((m == Mnemonic::ADDU || m == Mnemonic::BEQ || m == Mnemonic::BNE) && s.has_imm_table)
            throw ConfigError(std::string(mnemonic_name(m)) + " cannot carry an immediate table");
        if ((m == Mnemonic::LW || m == Mnemonic::ADDIU || m == Mnemonic::SW ||
             m == Mnemonic::SLL) &&
            !s.has_imm_table)
            throw ConfigError(std::string(mnemonic_name(m)) +
                              " needs an immediate table to rebuild its immediate");
    }
}

std::optional<uint32_t> LutSet::reg_index(Mnemonic m, const RegCombo& combo) const {
    auto it = tables.find(m);
    if (it == tables.end()) return std::nullopt;
    const auto& regs = it->second.regs;
    for (uint32_t k = 0; k < regs.size(); ++k)
        if (regs[k] == combo) return k;
    return std::nullopt;
}

std::optional<uint32_t> LutSet::imm_index(Mnemonic m, int16_t imm) const {
    auto it = tables.find(m);
    if (it == tables.end()) return std::nullopt;
    const auto& imms = it->second.imms;
    for (uint32_t k = 0; k < imms.size(); ++k)
        if (imms[k] == imm) return k;
    return std::nullopt;
}

EncodingScheme build_scheme(const Profile& profile, const SchemeLayout& layout) {
    layout.validate();
    LutSet luts;
    for (Mnemonic m : kShortMnemonics) {
        const LutShape& shape = layout.shape(m);
        LutSet::Tables tables;

        std::vector<std::pair<uint32_t, uint64_t>> regs;
        for (const auto& [packed, count] : profile.reg_marginal(m)) regs.emplace_back(packed, count);
        std::sort(regs.begin(), regs.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (regs.size() > shape.reg_capacity()) regs.resize(shape.reg_capacity());
        for (const auto& [packed, count] : regs) {
            Instruction skeleton;
            skeleton.op = m;
            RegCombo combo = reg_combo_of(skeleton);
            combo.regs = {static_cast<uint8_t>((packed >> 10) & 0x1f),
                          static_cast<uint8_t>((packed >> 5) & 0x1f),
                          static_cast<uint8_t>(packed & 0x1f)};
            tables.regs.push_back(combo);
        }

        if (shape.has_imm_table) {
            std::vector<std::pair<uint16_t, uint64_t>> imms;
            for (const auto& [raw, count] : profile.imm_marginal(m)) imms.emplace_back(raw, count);
            std::sort(imms.begin(), imms.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            if (imms.size() > shape.imm_capacity()) imms.resize(shape.imm_capacity());
            for (const auto& [raw, count] : imms)
                tables.imms.push_back(static_cast<int16_t>(raw));
        }
        luts.tables[m] = std::move(tables);
    }
    return EncodingScheme::with_default_prefix(layout, std::move(luts));
}

CoverageReport coverage(const Profile& profile, const EncodingScheme& scheme) {
    CoverageReport report;
    if (profile.total == 0) return report;
    for (Mnemonic m : kShortMnemonics) {
        auto it = profile.arg_counts.find(m);
        if (it == profile.arg_counts.end()) continue;
        const LutShape& shape = scheme.layout.shape(m);
        uint64_t hits = 0;
        for (const auto& [key, count] : it->second) {
            Instruction skeleton;
            skeleton.op = m;
            RegCombo combo = reg_combo_of(skeleton);
            combo.regs = {static_cast<uint8_t>((key.packed_regs >> 10) & 0x1f),
                          static_cast<uint8_t>((key.packed_regs >> 5) & 0x1f),
                          static_cast<uint8_t>(key.packed_regs & 0x1f)};
            if (!scheme.luts.reg_index(m, combo)) continue;
            if (shape.has_imm_table) {
                if (key.imm_pattern < 0) continue;
                if (!scheme.luts.imm_index(m, static_cast<int16_t>(key.imm_pattern))) continue;
            }
            hits += count;
        }
        if (hits > 0) {
            double frac = static_cast<double>(hits) / static_cast<double>(profile.total);
            report.per_mnemonic[m] = frac;
            report.total += frac;
        }
    }
    return report;
}

// --- text forms ---------------------------------------------------------

std::string format_profile(const Profile& profile) {
    std::ostringstream out;
    out << "total " << profile.total << '\n';
    for (const auto& [m, count] : profile.opcode_counts)
        out << "op " << mnemonic_name(m) << ' ' << count << '\n';
    for (const auto& [m, args] : profile.arg_counts) {
        // count desc, then packed asc, then imm asc
        std::vector<std::pair<Profile::ArgKey, uint64_t>> rows(args.begin(), args.end());
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        Instruction skeleton;
        skeleton.op = m;
        uint8_t arity = reg_combo_of(skeleton).arity;
        for (const auto& [key, count] : rows) {
            out << "arg " << mnemonic_name(m) << ' ';
            if (arity == 0) {
                out << '-';
            } else {
                for (uint8_t k = 0; k < arity; ++k) {
                    if (k) out << ',';
                    out << ((key.packed_regs >> (10 - 5 * k)) & 0x1f);
                }
            }
            out << ' ';
            if (key.imm_pattern < 0)
                out << '-';
            else
                out << static_cast<int16_t>(static_cast<uint16_t>(key.imm_pattern));
            out << ' ' << count << '\n';
        }
    }
    return out.str();
}

Profile parse_profile(std::string_view text) {
    Profile p;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::string kind;
        if (!(ss >> kind)) continue;
        if (kind == "total") {
            if (!(ss >> p.total)) throw ParseError("bad total", line_no);
        } else if (kind == "op") {
            std::string name;
            uint64_t count;
            if (!(ss >> name >> count)) throw ParseError("bad op line", line_no);
            auto m = mnemonic_from_name(name);
            if (!m) throw ParseError("unknown mnemonic '" + name + "'", line_no);
            p.opcode_counts[*m] += count;
        } else if (kind == "arg") {
            std::string name, regs, imm;
            uint64_t count;
            if (!(ss >> name >> regs >> imm >> count)) throw ParseError("bad arg line", line_no);
            auto m = mnemonic_from_name(name);
            if (!m) throw ParseError("unknown mnemonic '" + name + "'", line_no);
            Profile::ArgKey key;
            if (regs != "-") {
                uint32_t packed = 0;
                int field = 0;
                std::istringstream rs(regs);
                std::string num;
                while (std::getline(rs, num, ',')) {
                    if (field >= 3) throw ParseError("too many registers", line_no);
                    packed |= (std::stoul(num) & 0x1f) << (10 - 5 * field);
                    ++field;
                }
                key.packed_regs = packed;
            }
            if (imm != "-")
                key.imm_pattern = static_cast<uint16_t>(static_cast<int16_t>(std::stoi(imm)));
            p.arg_counts[*m][key] += count;
        } else {
            throw ParseError("unknown record '" + kind + "'", line_no);
        }
    }
    p.validate();
    return p;
}

std::string dump_scheme(const EncodingScheme& scheme) {
    std::ostringstream out;
    for (Mnemonic m : kShortMnemonics) {
        const LutShape& shape = scheme.layout.shape(m);
        auto it = scheme.luts.tables.find(m);
        out << mnemonic_name(m) << " reg[" << scheme.luts.tables.at(m).regs.size() << '/'
            << shape.reg_capacity() << "]";
        if (shape.has_imm_table)
            out << " imm[" << it->second.imms.size() << '/' << shape.imm_capacity() << "]";
        out << '\n';
        Instruction skeleton;
        skeleton.op = m;
        uint8_t arity = reg_combo_of(skeleton).arity;
        for (std::size_t k = 0; k < it->second.regs.size(); ++k) {
            out << "  r" << k << ": ";
            const RegCombo& combo = it->second.regs[k];
            for (uint8_t f = 0; f < arity; ++f) {
                if (f) out << ',';
                out << static_cast<unsigned>(combo.regs[f]);
            }
            out << '\n';
        }
        for (std::size_t k = 0; k < it->second.imms.size(); ++k)
            out << "  i" << k << ": " << it->second.imms[k] << '\n';
    }
    return out.str();
}

} // namespace vli
