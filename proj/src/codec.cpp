#include "vli/codec.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace vli {

uint8_t class_length(CodeClass cls) {
    switch (cls) {
    case CodeClass::Full:
        return 4;
    case CodeClass::SBeq:
    case CodeClass::SBne:
        return 2;
    case CodeClass::Mid24:
        return 3;
    case CodeClass::Illegal:
        return 0;
    default:
        return 1;
    }
}

std::optional<Mnemonic> class_mnemonic(CodeClass cls) {
    switch (cls) {
    case CodeClass::SLw:
        return Mnemonic::LW;
    case CodeClass::SAddiu:
        return Mnemonic::ADDIU;
    case CodeClass::SSw:
        return Mnemonic::SW;
    case CodeClass::SSll:
        return Mnemonic::SLL;
    case CodeClass::SAddu:
        return Mnemonic::ADDU;
    case CodeClass::SBeq:
        return Mnemonic::BEQ;
    case CodeClass::SBne:
        return Mnemonic::BNE;
    default:
        return std::nullopt;
    }
}

std::string_view class_name(CodeClass cls) {
    switch (cls) {
    case CodeClass::Full:
        return "FULL";
    case CodeClass::SLw:
        return "S_LW";
    case CodeClass::SAddiu:
        return "S_ADDIU";
    case CodeClass::SSw:
        return "S_SW";
    case CodeClass::SSll:
        return "S_SLL";
    case CodeClass::SAddu:
        return "S_ADDU";
    case CodeClass::SBeq:
        return "S_BEQ";
    case CodeClass::SBne:
        return "S_BNE";
    case CodeClass::Mid24:
        return "MID24";
    case CodeClass::Pad:
        return "PAD";
    case CodeClass::Illegal:
        return "ILLEGAL";
    }
    return "?";
}

std::vector<PrefixEntry> default_prefix_table() {
    return {
        {0b10000000, 1, CodeClass::Full},
        {0b01000000, 3, CodeClass::SLw},
        {0b01100000, 3, CodeClass::SAddiu},
        {0b00010000, 4, CodeClass::SSw},
        {0b00100000, 4, CodeClass::SSll},
        {0b00110000, 4, CodeClass::SAddu},
        {0b00001000, 6, CodeClass::SBeq},
        {0b00001100, 6, CodeClass::SBne},
        {0b00000100, 6, CodeClass::Mid24},
        {0b00000000, 8, CodeClass::Pad},
        {0b00000001, 8, CodeClass::Illegal},
        {0b00000010, 8, CodeClass::Illegal},
        {0b00000011, 8, CodeClass::Illegal},
    };
}

void EncodingScheme::finalize() {
    layout.validate();
    std::array<int, 256> owner;
    owner.fill(-1);
    for (std::size_t e = 0; e < prefix.size(); ++e) {
        const PrefixEntry& entry = prefix[e];
        if (entry.width == 0 || entry.width > 8)
            throw ConfigError("prefix entry with width " + std::to_string(entry.width));
        uint8_t mask = static_cast<uint8_t>(0xff << (8 - entry.width));
        if ((entry.pattern & ~mask) != 0)
            throw ConfigError("prefix pattern has bits below its width");
        for (int b = 0; b < 256; ++b) {
            if ((static_cast<uint8_t>(b) & mask) != entry.pattern) continue;
            if (owner[b] >= 0)
                throw ConfigError("prefix table is not prefix-free: byte " + std::to_string(b) +
                                  " matches two entries");
            owner[b] = static_cast<int>(e);
            byte_class[b] = entry.cls;
        }
    }
    for (int b = 0; b < 256; ++b)
        if (owner[b] < 0)
            throw ConfigError("prefix table does not classify byte " + std::to_string(b));
    // LUT sizes must respect the layout's capacities.
    for (Mnemonic m : short_eligible_mnemonics()) {
        const LutShape& shape = layout.shape(m);
        auto it = luts.tables.find(m);
        if (it == luts.tables.end()) {
            luts.tables[m] = {};
            continue;
        }
        if (it->second.regs.size() > shape.reg_capacity() ||
            it->second.imms.size() > shape.imm_capacity())
            throw ConfigError(std::string(mnemonic_name(m)) + " LUT exceeds its capacity");
    }
}

EncodingScheme EncodingScheme::with_default_prefix(SchemeLayout layout, LutSet luts) {
    EncodingScheme s;
    s.prefix = default_prefix_table();
    s.layout = std::move(layout);
    s.luts = std::move(luts);
    s.finalize();
    return s;
}

FirstByteInfo first_byte_length(uint8_t b, const EncodingScheme& scheme) {
    CodeClass cls = scheme.byte_class[b];
    if (cls == CodeClass::Illegal) {
        std::ostringstream msg;
        msg << "illegal first byte 0x" << std::hex << static_cast<int>(b);
        throw DecodeError(msg.str());
    }
    return {cls, class_length(cls)};
}

std::optional<uint32_t> CompressedImage::index_of_addr(uint32_t addr) const {
    auto it = addr_to_index_.find(addr);
    if (it == addr_to_index_.end()) return std::nullopt;
    return it->second;
}

void CompressedImage::rebuild_reverse_map() {
    addr_to_index_.clear();
    addr_to_index_.reserve(addr_map.size());
    for (uint32_t i = 0; i < addr_map.size(); ++i) addr_to_index_.emplace(addr_map[i], i);
}

namespace {

CodeClass short_class_of(Mnemonic m) {
    switch (m) {
    case Mnemonic::LW:
        return CodeClass::SLw;
    case Mnemonic::ADDIU:
        return CodeClass::SAddiu;
    case Mnemonic::SW:
        return CodeClass::SSw;
    case Mnemonic::SLL:
        return CodeClass::SSll;
    case Mnemonic::ADDU:
        return CodeClass::SAddu;
    case Mnemonic::BEQ:
        return CodeClass::SBeq;
    case Mnemonic::BNE:
        return CodeClass::SBne;
    default:
        return CodeClass::Full;
    }
}

uint8_t mid24_format_of(Mnemonic m) {
    switch (m) {
    case Mnemonic::ADDIU:
        return 0;
    case Mnemonic::LW:
        return 1;
    case Mnemonic::SW:
        return 2;
    default:
        return 3; // reserved
    }
}

Mnemonic mid24_mnemonic(uint8_t f) {
    switch (f) {
    case 0:
        return Mnemonic::ADDIU;
    case 1:
        return Mnemonic::LW;
    case 2:
        return Mnemonic::SW;
    default:
        throw DecodeError("reserved MID24 format id 3");
    }
}

// Shortest class ignoring branch displacement reach; relaxation widens later.
CodeClass classify_optimistic(const Instruction& i, const EncodingScheme& scheme) {
    Mnemonic m = i.op;
    if (is_short_eligible(m)) {
        const LutShape& shape = scheme.layout.shape(m);
        bool reg_hit = scheme.luts.reg_index(m, reg_combo_of(i)).has_value();
        bool imm_hit = true;
        if (shape.has_imm_table) {
            auto imm = imm_of(i);
            imm_hit = imm && scheme.luts.imm_index(m, *imm).has_value();
        }
        if (reg_hit && imm_hit) return short_class_of(m);
    }
    if (mid24_format_of(m) != 3 && i.imm >= -32 && i.imm <= 31) return CodeClass::Mid24;
    return CodeClass::Full;
}

uint32_t branch_target_index(const Instruction& i, uint32_t index, std::size_t program_size) {
    int64_t tgt;
    if (i.op == Mnemonic::J)
        tgt = i.jump_target;
    else
        tgt = static_cast<int64_t>(index) + 1 + i.imm;
    if (tgt < 0 || tgt >= static_cast<int64_t>(program_size))
        throw CompressError("instruction " + std::to_string(index) + ": branch target " +
                            std::to_string(tgt) + " outside the program");
    return static_cast<uint32_t>(tgt);
}

void emit_code(std::vector<uint8_t>& out, const Instruction& i, CodeClass cls, uint32_t addr,
               const std::vector<uint32_t>& addr_map, uint32_t index,
               const EncodingScheme& scheme) {
    Mnemonic m = i.op;
    auto lut_indices = [&](uint32_t& reg_idx, uint32_t& imm_idx) {
        const LutShape& shape = scheme.layout.shape(m);
        auto r = scheme.luts.reg_index(m, reg_combo_of(i));
        assert(r);
        reg_idx = *r;
        imm_idx = 0;
        if (shape.has_imm_table) {
            auto imm = imm_of(i);
            auto idx = scheme.luts.imm_index(m, *imm);
            assert(idx);
            imm_idx = *idx;
        }
    };

    switch (cls) {
    case CodeClass::SLw:
    case CodeClass::SAddiu:
    case CodeClass::SSw:
    case CodeClass::SSll:
    case CodeClass::SAddu: {
        uint32_t reg_idx, imm_idx;
        lut_indices(reg_idx, imm_idx);
        const LutShape& shape = scheme.layout.shape(m);
        uint8_t payload = static_cast<uint8_t>((reg_idx << (shape.has_imm_table ? shape.imm_bits : 0)) |
                                               imm_idx);
        uint8_t prefix = 0;
        switch (cls) {
        case CodeClass::SLw:
            prefix = 0b01000000;
            break;
        case CodeClass::SAddiu:
            prefix = 0b01100000;
            break;
        case CodeClass::SSw:
            prefix = 0b00010000;
            break;
        case CodeClass::SSll:
            prefix = 0b00100000;
            break;
        default:
            prefix = 0b00110000;
            break;
        }
        out.push_back(prefix | payload);
        break;
    }
    case CodeClass::SBeq:
    case CodeClass::SBne: {
        uint32_t reg_idx, imm_idx;
        lut_indices(reg_idx, imm_idx);
        uint32_t tgt = branch_target_index(i, index, addr_map.size());
        int64_t disp = static_cast<int64_t>(addr_map[tgt]) - (static_cast<int64_t>(addr) + 2);
        assert(disp >= -128 && disp <= 127);
        out.push_back((cls == CodeClass::SBeq ? 0b00001000 : 0b00001100) |
                      static_cast<uint8_t>(reg_idx));
        out.push_back(static_cast<uint8_t>(static_cast<int8_t>(disp)));
        break;
    }
    case CodeClass::Mid24: {
        uint16_t payload = static_cast<uint16_t>((static_cast<uint16_t>(i.rs) << 11) |
                                                 (static_cast<uint16_t>(i.rt) << 6) |
                                                 (static_cast<uint16_t>(i.imm) & 0x3f));
        out.push_back(0b00000100 | mid24_format_of(m));
        out.push_back(static_cast<uint8_t>(payload >> 8));
        out.push_back(static_cast<uint8_t>(payload & 0xff));
        break;
    }
    case CodeClass::Full: {
        uint32_t word;
        if (m == Mnemonic::BEQ || m == Mnemonic::BNE) {
            uint32_t tgt = branch_target_index(i, index, addr_map.size());
            int64_t disp = static_cast<int64_t>(addr_map[tgt]) - (static_cast<int64_t>(addr) + 4);
            if (disp < -32768 || disp > 32767)
                throw CompressError("instruction " + std::to_string(index) +
                                    ": branch displacement " + std::to_string(disp) +
                                    " overflows the 16-bit full form");
            Instruction reloc = i;
            reloc.imm = static_cast<int16_t>(disp);
            word = encode_full(reloc).bits;
        } else if (m == Mnemonic::J) {
            uint32_t tgt = branch_target_index(i, index, addr_map.size());
            uint32_t tgt_addr = addr_map[tgt];
            if (tgt_addr >= (1u << 26))
                throw CompressError("jump target address exceeds 26 bits");
            Instruction reloc = i;
            reloc.jump_target = tgt_addr;
            word = encode_full(reloc).bits;
        } else {
            word = encode_full(i).bits;
        }
        out.push_back(static_cast<uint8_t>(word >> 24));
        out.push_back(static_cast<uint8_t>(word >> 16));
        out.push_back(static_cast<uint8_t>(word >> 8));
        out.push_back(static_cast<uint8_t>(word));
        break;
    }
    default:
        assert(false);
    }
}

} // namespace

CompressedImage compress(const Program& program, const EncodingScheme& scheme) {
    const std::size_t n = program.code.size();
    for (uint32_t i = 0; i < n; ++i) {
        validate_instruction(program.code[i]);
        if (program.code[i].op == Mnemonic::BEQ || program.code[i].op == Mnemonic::BNE ||
            program.code[i].op == Mnemonic::J)
            branch_target_index(program.code[i], i, n);
    }

    std::vector<CodeClass> classes(n);
    for (uint32_t i = 0; i < n; ++i) classes[i] = classify_optimistic(program.code[i], scheme);

    std::vector<uint32_t> addr_map(n, 0);
    std::vector<uint8_t> pads(n, 0);

    // Lay out addresses with the one-branch-per-chunk pads, then widen any
    // short branch whose displacement no longer fits. Widening is sticky, so
    // this reaches a fixed point in at most n+1 passes.
    auto layout_pass = [&]() {
        uint32_t addr = 0;
        int64_t last_branch_chunk = -1;
        for (uint32_t i = 0; i < n; ++i) {
            pads[i] = 0;
            if (is_branch_class(program.code[i].op)) {
                if (static_cast<int64_t>(addr / 4) == last_branch_chunk) {
                    assert(addr % 4 != 0);
                    pads[i] = static_cast<uint8_t>(4 - addr % 4);
                    addr += pads[i];
                }
                last_branch_chunk = addr / 4;
            }
            addr_map[i] = addr;
            addr += class_length(classes[i]);
        }
        return addr;
    };

    uint32_t code_bytes = 0;
    for (;;) {
        code_bytes = layout_pass();
        bool changed = false;
        for (uint32_t i = 0; i < n; ++i) {
            if (classes[i] != CodeClass::SBeq && classes[i] != CodeClass::SBne) continue;
            uint32_t tgt = branch_target_index(program.code[i], i, n);
            int64_t disp =
                static_cast<int64_t>(addr_map[tgt]) - (static_cast<int64_t>(addr_map[i]) + 2);
            if (disp < -128 || disp > 127) {
                classes[i] = CodeClass::Full;
                changed = true;
            }
        }
        if (!changed) break;
    }

    CompressedImage image;
    image.scheme = scheme;
    image.addr_map = addr_map;
    image.bytes.reserve(code_bytes + 3);
    for (uint32_t i = 0; i < n; ++i) {
        image.bytes.insert(image.bytes.end(), pads[i], 0x00);
        assert(image.bytes.size() == addr_map[i]);
        emit_code(image.bytes, program.code[i], classes[i], addr_map[i], addr_map, i, scheme);
    }
    while (image.bytes.size() % 4 != 0) image.bytes.push_back(0x00);
    image.entry = addr_map.empty() ? 0 : addr_map[0];
    image.rebuild_reverse_map();
    return image;
}

DecodedAt decode_code(std::span<const uint8_t> code, uint32_t addr, const CompressedImage& image) {
    if (code.empty()) throw DecodeError("truncated instruction at byte " + std::to_string(addr));
    const EncodingScheme& scheme = image.scheme;
    FirstByteInfo info = first_byte_length(code[0], scheme);
    if (info.cls == CodeClass::Pad) return {Instruction{}, 1, CodeClass::Pad};
    if (code.size() < info.length)
        throw DecodeError("truncated instruction at byte " + std::to_string(addr));

    auto target_index = [&](int64_t tgt_addr) -> uint32_t {
        if (tgt_addr < 0) throw DecodeError("branch target before image start");
        auto idx = image.index_of_addr(static_cast<uint32_t>(tgt_addr));
        if (!idx)
            throw DecodeError("branch target 0x" + std::to_string(tgt_addr) +
                              " is not an instruction start");
        return *idx;
    };
    auto semantic_offset = [&](uint32_t tgt_idx) -> int16_t {
        auto cur = image.index_of_addr(addr);
        if (!cur) throw DecodeError("code at unmapped address " + std::to_string(addr));
        int64_t off = static_cast<int64_t>(tgt_idx) - (static_cast<int64_t>(*cur) + 1);
        if (off < -32768 || off > 32767) throw DecodeError("branch offset out of range");
        return static_cast<int16_t>(off);
    };

    DecodedAt out;
    out.cls = info.cls;
    out.length = info.length;
    switch (info.cls) {
    case CodeClass::Full: {
        uint32_t w = (static_cast<uint32_t>(code[0]) << 24) | (static_cast<uint32_t>(code[1]) << 16) |
                     (static_cast<uint32_t>(code[2]) << 8) | code[3];
        uint32_t id = (w >> 26) & 0x1f;
        if (id >= kMnemonicCount) throw DecodeError("unknown opcode id " + std::to_string(id));
        Mnemonic m = static_cast<Mnemonic>(id);
        if (m == Mnemonic::BEQ || m == Mnemonic::BNE) {
            int16_t disp = static_cast<int16_t>(w & 0xffff);
            uint32_t tgt_idx = target_index(static_cast<int64_t>(addr) + 4 + disp);
            out.instr = m == Mnemonic::BEQ
                            ? make_beq((w >> 21) & 0x1f, (w >> 16) & 0x1f, semantic_offset(tgt_idx))
                            : make_bne((w >> 21) & 0x1f, (w >> 16) & 0x1f, semantic_offset(tgt_idx));
        } else if (m == Mnemonic::J) {
            out.instr = make_j(target_index(w & ((1u << 26) - 1)));
        } else {
            out.instr = decode_full(FullWord{w});
        }
        break;
    }
    case CodeClass::Mid24: {
        Mnemonic m = mid24_mnemonic(code[0] & 0x3);
        uint16_t payload = static_cast<uint16_t>((code[1] << 8) | code[2]);
        uint8_t rs = (payload >> 11) & 0x1f;
        uint8_t rt = (payload >> 6) & 0x1f;
        int16_t imm = static_cast<int16_t>(payload & 0x3f);
        if (imm & 0x20) imm = static_cast<int16_t>(imm - 64);
        if (m == Mnemonic::ADDIU)
            out.instr = make_addiu(rt, rs, imm);
        else if (m == Mnemonic::LW)
            out.instr = make_lw(rt, imm, rs);
        else
            out.instr = make_sw(rt, imm, rs);
        break;
    }
    case CodeClass::SBeq:
    case CodeClass::SBne: {
        Mnemonic m = *class_mnemonic(info.cls);
        uint32_t reg_idx = code[0] & 0x3;
        auto it = scheme.luts.tables.find(m);
        if (it == scheme.luts.tables.end() || reg_idx >= it->second.regs.size())
            throw DecodeError(std::string(class_name(info.cls)) + " register LUT index " +
                              std::to_string(reg_idx) + " marked invalid");
        int8_t disp = static_cast<int8_t>(code[1]);
        uint32_t tgt_idx = target_index(static_cast<int64_t>(addr) + 2 + disp);
        Instruction i;
        i.op = m;
        apply_reg_combo(i, it->second.regs[reg_idx]);
        i.imm = semantic_offset(tgt_idx);
        out.instr = i;
        break;
    }
    default: { // one-byte LUT classes
        Mnemonic m = *class_mnemonic(info.cls);
        const LutShape& shape = scheme.layout.shape(m);
        uint8_t payload_mask = static_cast<uint8_t>(
            (1u << (shape.reg_bits + (shape.has_imm_table ? shape.imm_bits : 0))) - 1);
        uint8_t payload = code[0] & payload_mask;
        uint32_t imm_idx = shape.has_imm_table ? payload & ((1u << shape.imm_bits) - 1) : 0;
        uint32_t reg_idx = shape.has_imm_table ? payload >> shape.imm_bits : payload;
        auto it = scheme.luts.tables.find(m);
        if (it == scheme.luts.tables.end() || reg_idx >= it->second.regs.size())
            throw DecodeError(std::string(class_name(info.cls)) + " register LUT index " +
                              std::to_string(reg_idx) + " marked invalid");
        Instruction i;
        i.op = m;
        apply_reg_combo(i, it->second.regs[reg_idx]);
        if (shape.has_imm_table) {
            if (imm_idx >= it->second.imms.size())
                throw DecodeError(std::string(class_name(info.cls)) + " immediate LUT index " +
                                  std::to_string(imm_idx) + " marked invalid");
            apply_imm(i, it->second.imms[imm_idx]);
        }
        out.instr = i;
        break;
    }
    }
    validate_instruction(out.instr);
    return out;
}

DecodedAt decode_at(const CompressedImage& image, uint32_t addr) {
    if (addr >= image.bytes.size())
        throw DecodeError("address " + std::to_string(addr) + " outside the image");
    std::span<const uint8_t> rest(image.bytes.data() + addr, image.bytes.size() - addr);
    return decode_code(rest.subspan(0, std::min<std::size_t>(4, rest.size())), addr, image);
}

Program decompress(const CompressedImage& image) {
    Program prog;
    uint32_t addr = 0;
    while (addr < image.bytes.size()) {
        if (image.scheme.byte_class[image.bytes[addr]] == CodeClass::Pad) {
            ++addr;
            continue;
        }
        std::size_t index = prog.code.size();
        if (index >= image.addr_map.size() || image.addr_map[index] != addr)
            throw DecodeError("corrupt image: instruction " + std::to_string(index) +
                              " decodes at byte " + std::to_string(addr) +
                              " but the address map disagrees");
        DecodedAt d = decode_at(image, addr);
        prog.code.push_back(d.instr);
        addr += d.length;
    }
    if (prog.code.size() != image.addr_map.size())
        throw DecodeError("corrupt image: address map names " +
                          std::to_string(image.addr_map.size()) + " instructions, stream holds " +
                          std::to_string(prog.code.size()));
    return prog;
}

ScanReport static_scan(const CompressedImage& image) {
    ScanReport report;
    report.chunk_count = image.chunk_count();
    uint32_t addr = 0;
    std::map<uint32_t, int> branch_starts;
    while (addr < image.bytes.size()) {
        FirstByteInfo info = first_byte_length(image.bytes[addr], image.scheme);
        report.count_per_class[info.cls]++;
        report.bytes_per_class[info.cls] += info.length;
        bool branch = info.cls == CodeClass::SBeq || info.cls == CodeClass::SBne;
        if (info.cls == CodeClass::Full) {
            // opcode id sits in bits 6..2 of the first byte
            Mnemonic m = static_cast<Mnemonic>((image.bytes[addr] >> 2) & 0x1f);
            branch = is_branch_class(m);
        }
        if (info.cls != CodeClass::Pad) report.instruction_count++;
        if (branch) {
            uint32_t chunk = addr / 4;
            if (++branch_starts[chunk] == 2) report.violations.push_back(chunk);
        }
        addr += info.length;
    }
    report.size_ratio = report.instruction_count == 0
                            ? 0.0
                            : static_cast<double>(image.bytes.size()) /
                                  (4.0 * static_cast<double>(report.instruction_count));
    return report;
}

std::string format_scan(const ScanReport& report) {
    std::ostringstream out;
    out << "chunks " << report.chunk_count << '\n';
    out << "instructions " << report.instruction_count << '\n';
    for (const auto& [cls, count] : report.count_per_class)
        out << class_name(cls) << ' ' << count << " (" << report.bytes_per_class.at(cls)
            << " bytes)\n";
    out << "size_ratio " << report.size_ratio << '\n';
    out << "branch_per_chunk_violations " << report.violations.size() << '\n';
    for (uint32_t chunk : report.violations) out << "  violation in chunk " << chunk << '\n';
    return out.str();
}

// --- image files ------------------------------------------------------------

namespace {

void put_u16(std::ostream& out, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

void put_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

uint16_t get_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) throw IoError("truncated image file");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("truncated image file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

constexpr char kMagic[4] = {'V', 'L', 'I', '1'};
constexpr uint8_t kVersion = 1;

} // namespace

void save_image(const CompressedImage& image, std::ostream& out) {
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    put_u32(out, image.entry);

    auto shorts = short_eligible_mnemonics();
    out.put(static_cast<char>(shorts.size()));
    for (Mnemonic m : shorts) {
        const LutShape& shape = image.scheme.layout.shape(m);
        const auto& tables = image.scheme.luts.tables.at(m);
        out.put(static_cast<char>(m));
        out.put(static_cast<char>(shape.reg_bits));
        out.put(static_cast<char>(shape.imm_bits));
        out.put(static_cast<char>(shape.has_imm_table ? 1 : 0));
        put_u16(out, static_cast<uint16_t>(tables.regs.size()));
        for (const RegCombo& combo : tables.regs) put_u16(out, static_cast<uint16_t>(combo.packed()));
        put_u16(out, static_cast<uint16_t>(tables.imms.size()));
        for (int16_t imm : tables.imms) put_u16(out, static_cast<uint16_t>(imm));
    }

    put_u32(out, static_cast<uint32_t>(image.addr_map.size()));
    for (uint32_t addr : image.addr_map) put_u32(out, addr);

    put_u32(out, image.chunk_count());
    out.write(reinterpret_cast<const char*>(image.bytes.data()),
              static_cast<std::streamsize>(image.bytes.size()));
    if (!out) throw IoError("failed to write image");
}

CompressedImage load_image(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a VLI1 image");
    int version = in.get();
    if (version != kVersion)
        throw IoError("unsupported image version " + std::to_string(version));

    CompressedImage image;
    image.entry = get_u32(in);

    int table_count = in.get();
    if (table_count < 0) throw IoError("truncated image file");
    SchemeLayout layout;
    LutSet luts;
    for (int t = 0; t < table_count; ++t) {
        int id = in.get();
        int reg_bits = in.get();
        int imm_bits = in.get();
        int has_imm = in.get();
        if (has_imm < 0) throw IoError("truncated image file");
        if (id < 0 || static_cast<std::size_t>(id) >= kMnemonicCount)
            throw IoError("image scheme names an unknown mnemonic");
        Mnemonic m = static_cast<Mnemonic>(id);
        layout.shapes[m] = {static_cast<uint8_t>(reg_bits), static_cast<uint8_t>(imm_bits),
                            has_imm != 0};
        LutSet::Tables tables;
        uint16_t reg_count = get_u16(in);
        Instruction skeleton;
        skeleton.op = m;
        uint8_t arity = reg_combo_of(skeleton).arity;
        for (uint16_t k = 0; k < reg_count; ++k) {
            uint16_t packed = get_u16(in);
            RegCombo combo;
            combo.arity = arity;
            combo.regs = {static_cast<uint8_t>((packed >> 10) & 0x1f),
                          static_cast<uint8_t>((packed >> 5) & 0x1f),
                          static_cast<uint8_t>(packed & 0x1f)};
            tables.regs.push_back(combo);
        }
        uint16_t imm_count = get_u16(in);
        for (uint16_t k = 0; k < imm_count; ++k)
            tables.imms.push_back(static_cast<int16_t>(get_u16(in)));
        luts.tables[m] = std::move(tables);
    }
    image.scheme = EncodingScheme::with_default_prefix(std::move(layout), std::move(luts));

    uint32_t map_len = get_u32(in);
    image.addr_map.reserve(map_len);
    for (uint32_t k = 0; k < map_len; ++k) image.addr_map.push_back(get_u32(in));

    uint32_t chunk_count = get_u32(in);
    image.bytes.resize(static_cast<std::size_t>(chunk_count) * 4);
    in.read(reinterpret_cast<char*>(image.bytes.data()),
            static_cast<std::streamsize>(image.bytes.size()));
    if (!in) throw IoError("truncated image file");
    image.rebuild_reverse_map();
    return image;
}

void save_image_file(const CompressedImage& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_image(image, out);
}

CompressedImage load_image_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load_image(in);
}

} // namespace vli
