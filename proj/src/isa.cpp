#include "vli/isa.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <map>
#include <sstream>

namespace vli {

namespace {

struct MnemonicInfo {
    std::string_view name;
    Format format;
};

constexpr std::array<MnemonicInfo, kMnemonicCount> kInfo = {{
    {"NOP", Format::None},
    {"LW", Format::Mem},
    {"SW", Format::Mem},
    {"ADDIU", Format::ArithImm},
    {"ADDU", Format::Reg3},
    {"SLL", Format::Shift},
    {"BEQ", Format::Branch},
    {"BNE", Format::Branch},
    {"LUI", Format::LoadUpper},
    {"ORI", Format::ArithImm},
    {"SLT", Format::Reg3},
    {"J", Format::Jump},
    {"JR", Format::JumpReg},
    {"HALT", Format::None},
}};

constexpr uint32_t kMarkerBit = 0x80000000u;
constexpr uint32_t kTargetMask = (1u << 26) - 1;

} // namespace

Format format_of(Mnemonic m) {
    return kInfo[static_cast<std::size_t>(m)].format;
}

std::string_view mnemonic_name(Mnemonic m) {
    return kInfo[static_cast<std::size_t>(m)].name;
}

std::optional<Mnemonic> mnemonic_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kInfo.size(); ++i) {
        if (kInfo[i].name == name) return static_cast<Mnemonic>(i);
    }
    return std::nullopt;
}

bool is_branch_class(Mnemonic m) {
    return m == Mnemonic::BEQ || m == Mnemonic::BNE || m == Mnemonic::J || m == Mnemonic::JR;
}

Instruction make_nop() { return {}; }
Instruction make_halt() {
    Instruction i;
    i.op = Mnemonic::HALT;
    return i;
}
Instruction make_lw(uint8_t rt, int16_t imm, uint8_t rs) {
    Instruction i;
    i.op = Mnemonic::LW;
    i.rt = rt;
    i.rs = rs;
    i.imm = imm;
    return i;
}
Instruction make_sw(uint8_t rt, int16_t imm, uint8_t rs) {
    Instruction i = make_lw(rt, imm, rs);
    i.op = Mnemonic::SW;
    return i;
}
Instruction make_addiu(uint8_t rt, uint8_t rs, int16_t imm) {
    Instruction i;
    i.op = Mnemonic::ADDIU;
    i.rt = rt;
    i.rs = rs;
    i.imm = imm;
    return i;
}
Instruction make_addu(uint8_t rd, uint8_t rs, uint8_t rt) {
    Instruction i;
    i.op = Mnemonic::ADDU;
    i.rd = rd;
    i.rs = rs;
    i.rt = rt;
    return i;
}
Instruction make_sll(uint8_t rd, uint8_t rt, uint8_t shamt) {
    Instruction i;
    i.op = Mnemonic::SLL;
    i.rd = rd;
    i.rt = rt;
    i.shamt = shamt;
    return i;
}
Instruction make_beq(uint8_t rs, uint8_t rt, int16_t offset) {
    Instruction i;
    i.op = Mnemonic::BEQ;
    i.rs = rs;
    i.rt = rt;
    i.imm = offset;
    return i;
}
Instruction make_bne(uint8_t rs, uint8_t rt, int16_t offset) {
    Instruction i = make_beq(rs, rt, offset);
    i.op = Mnemonic::BNE;
    return i;
}
Instruction make_lui(uint8_t rt, int16_t imm) {
    Instruction i;
    i.op = Mnemonic::LUI;
    i.rt = rt;
    i.imm = imm;
    return i;
}
Instruction make_ori(uint8_t rt, uint8_t rs, int16_t imm) {
    Instruction i;
    i.op = Mnemonic::ORI;
    i.rt = rt;
    i.rs = rs;
    i.imm = imm;
    return i;
}
Instruction make_slt(uint8_t rd, uint8_t rs, uint8_t rt) {
    Instruction i = make_addu(rd, rs, rt);
    i.op = Mnemonic::SLT;
    return i;
}
Instruction make_j(uint32_t target) {
    Instruction i;
    i.op = Mnemonic::J;
    i.jump_target = target;
    return i;
}
Instruction make_jr(uint8_t rs) {
    Instruction i;
    i.op = Mnemonic::JR;
    i.rs = rs;
    return i;
}

namespace {

void require_zero(bool rs, bool rt, bool rd, bool shamt, bool imm, bool target,
                  const Instruction& i) {
    auto fail = [&](const char* field) {
        throw EncodeError(std::string(mnemonic_name(i.op)) + ": field " + field +
                          " must be zero for this format");
    };
    if (rs && i.rs != 0) fail("rs");
    if (rt && i.rt != 0) fail("rt");
    if (rd && i.rd != 0) fail("rd");
    if (shamt && i.shamt != 0) fail("shamt");
    if (imm && i.imm != 0) fail("imm");
    if (target && i.jump_target != 0) fail("jump_target");
}

} // namespace

void validate_instruction(const Instruction& i) {
    if (static_cast<std::size_t>(i.op) >= kMnemonicCount)
        throw EncodeError("unknown opcode id " + std::to_string(static_cast<int>(i.op)));
    if (i.rs > 31 || i.rt > 31 || i.rd > 31)
        throw EncodeError(std::string(mnemonic_name(i.op)) + ": register index out of range");
    if (i.shamt > 31)
        throw EncodeError("SLL: shift amount out of range");
    if (i.jump_target > kTargetMask)
        throw EncodeError("J: target exceeds 26 bits");

    switch (format_of(i.op)) {
    case Format::None:
        require_zero(true, true, true, true, true, true, i);
        break;
    case Format::Reg3:
        require_zero(false, false, false, true, true, true, i);
        break;
    case Format::Shift:
        require_zero(true, false, false, false, true, true, i);
        break;
    case Format::Mem:
    case Format::ArithImm:
        require_zero(false, false, true, true, false, true, i);
        break;
    case Format::LoadUpper:
        require_zero(true, false, true, true, false, true, i);
        break;
    case Format::Branch:
        require_zero(false, false, true, true, false, true, i);
        break;
    case Format::Jump:
        require_zero(true, true, true, true, true, false, i);
        break;
    case Format::JumpReg:
        require_zero(false, true, true, true, true, true, i);
        break;
    }
}

// Layout: [31]=1 [30:26]=opcode, then per format:
//   Reg3/Shift: rs[25:21] rt[20:16] rd[15:11] shamt[10:6]
//   Mem/ArithImm/Branch/LoadUpper: rs[25:21] rt[20:16] imm[15:0]
//   Jump: target[25:0]
FullWord encode_full(const Instruction& i) {
    validate_instruction(i);
    uint32_t w = kMarkerBit | (static_cast<uint32_t>(i.op) << 26);
    switch (format_of(i.op)) {
    case Format::None:
        break;
    case Format::Reg3:
    case Format::Shift:
    case Format::JumpReg:
        w |= static_cast<uint32_t>(i.rs) << 21;
        w |= static_cast<uint32_t>(i.rt) << 16;
        w |= static_cast<uint32_t>(i.rd) << 11;
        w |= static_cast<uint32_t>(i.shamt) << 6;
        break;
    case Format::Mem:
    case Format::ArithImm:
    case Format::LoadUpper:
    case Format::Branch:
        w |= static_cast<uint32_t>(i.rs) << 21;
        w |= static_cast<uint32_t>(i.rt) << 16;
        w |= static_cast<uint32_t>(static_cast<uint16_t>(i.imm));
        break;
    case Format::Jump:
        w |= i.jump_target;
        break;
    }
    return FullWord{w};
}

Instruction decode_full(FullWord word) {
    const uint32_t w = word.bits;
    if ((w & kMarkerBit) == 0)
        throw DecodeError("not a full word: bit 31 is clear");
    const uint32_t id = (w >> 26) & 0x1f;
    if (id >= kMnemonicCount)
        throw DecodeError("unknown opcode id " + std::to_string(id));

    Instruction i;
    i.op = static_cast<Mnemonic>(id);
    uint32_t used = kMarkerBit | (0x1fu << 26);
    switch (format_of(i.op)) {
    case Format::None:
        break;
    case Format::Reg3:
    case Format::Shift:
    case Format::JumpReg:
        i.rs = (w >> 21) & 0x1f;
        i.rt = (w >> 16) & 0x1f;
        i.rd = (w >> 11) & 0x1f;
        i.shamt = (w >> 6) & 0x1f;
        used |= 0x03ffffc0u;
        break;
    case Format::Mem:
    case Format::ArithImm:
    case Format::LoadUpper:
    case Format::Branch:
        i.rs = (w >> 21) & 0x1f;
        i.rt = (w >> 16) & 0x1f;
        i.imm = static_cast<int16_t>(w & 0xffff);
        used |= 0x03ffffffu;
        break;
    case Format::Jump:
        i.jump_target = w & kTargetMask;
        used |= kTargetMask;
        break;
    }
    if ((w & ~used) != 0)
        throw DecodeError("reserved bits set in full word");
    // Formats that use only a subset of the register block must have zeros
    // in the rest; validate_instruction enforces it.
    try {
        validate_instruction(i);
    } catch (const EncodeError& e) {
        throw DecodeError(std::string("full word decodes to invalid instruction: ") + e.what());
    }
    return i;
}

// --- assembly text ---------------------------------------------------------

namespace {

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;
    int line_no = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }
    bool at_end() {
        skip_ws();
        return pos >= text.size();
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, line_no, static_cast<int>(pos) + 1);
    }
    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }
    void expect(char c) {
        skip_ws();
        if (pos >= text.size() || text[pos] != c)
            fail(std::string("expected '") + c + "'");
        ++pos;
    }
    std::string_view word() {
        skip_ws();
        std::size_t start = pos;
        while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) ||
                                     text[pos] == '_'))
            ++pos;
        return text.substr(start, pos - start);
    }
    uint8_t reg() {
        skip_ws();
        if (pos >= text.size() || text[pos] != 'r')
            fail("expected register (r0..r31)");
        ++pos;
        long v = integer("register number");
        if (v < 0 || v > 31)
            fail("register index out of range (r0..r31)");
        return static_cast<uint8_t>(v);
    }
    long integer(const char* what) {
        skip_ws();
        std::size_t start = pos;
        if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) ++pos;
        int base = 10;
        if (pos + 1 < text.size() && text[pos] == '0' &&
            (text[pos + 1] == 'x' || text[pos + 1] == 'X')) {
            base = 16;
            pos += 2;
        }
        std::size_t digits = pos;
        while (pos < text.size() &&
               (base == 16 ? std::isxdigit(static_cast<unsigned char>(text[pos]))
                           : std::isdigit(static_cast<unsigned char>(text[pos]))))
            ++pos;
        if (pos == digits)
            fail(std::string("expected ") + what);
        long value = 0;
        std::string body(text.substr(digits, pos - digits));
        value = std::stol(body, nullptr, base);
        if (start < text.size() && text[start] == '-') value = -value;
        return value;
    }
    int16_t imm16(const char* what) {
        long v = integer(what);
        if (v < -32768 || v > 65535)
            fail(std::string(what) + " out of 16-bit range");
        return static_cast<int16_t>(static_cast<uint16_t>(v & 0xffff));
    }
};

std::string_view strip_comment(std::string_view line) {
    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    return line;
}

} // namespace

Instruction parse_asm(std::string_view line) {
    return parse_asm(line, 0, nullptr, 0);
}

Instruction parse_asm(std::string_view line, uint32_t index, const LabelResolver& resolve,
                      int line_no) {
    Cursor c{strip_comment(line), 0, line_no};
    if (c.at_end()) c.fail("empty instruction");
    std::string_view mn = c.word();
    std::string upper(mn);
    for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    auto m = mnemonic_from_name(upper);
    if (!m) c.fail("unknown mnemonic '" + std::string(mn) + "'");

    // Branch/jump operands: numeric value, or a label if a resolver is given.
    auto branch_offset = [&](uint32_t idx) -> int16_t {
        c.skip_ws();
        if (c.pos < c.text.size() &&
            (std::isalpha(static_cast<unsigned char>(c.text[c.pos])) || c.text[c.pos] == '_')) {
            std::string_view label = c.word();
            if (!resolve) c.fail("label operand needs a resolver");
            auto target = resolve(label);
            if (!target) c.fail("undefined label '" + std::string(label) + "'");
            int64_t off = static_cast<int64_t>(*target) - (static_cast<int64_t>(idx) + 1);
            if (off < -32768 || off > 32767) c.fail("branch target out of range");
            return static_cast<int16_t>(off);
        }
        long v = c.integer("branch offset");
        if (v < -32768 || v > 32767) c.fail("branch offset out of range");
        return static_cast<int16_t>(v);
    };
    auto jump_target = [&]() -> uint32_t {
        c.skip_ws();
        if (c.pos < c.text.size() &&
            (std::isalpha(static_cast<unsigned char>(c.text[c.pos])) || c.text[c.pos] == '_')) {
            std::string_view label = c.word();
            if (!resolve) c.fail("label operand needs a resolver");
            auto target = resolve(label);
            if (!target) c.fail("undefined label '" + std::string(label) + "'");
            return *target;
        }
        long v = c.integer("jump target");
        if (v < 0 || v > static_cast<long>(kTargetMask)) c.fail("jump target out of range");
        return static_cast<uint32_t>(v);
    };

    Instruction i;
    i.op = *m;
    switch (format_of(*m)) {
    case Format::None:
        break;
    case Format::Reg3:
        i.rd = c.reg();
        c.expect(',');
        i.rs = c.reg();
        c.expect(',');
        i.rt = c.reg();
        break;
    case Format::Shift:
        i.rd = c.reg();
        c.expect(',');
        i.rt = c.reg();
        c.expect(',');
        {
            long v = c.integer("shift amount");
            if (v < 0 || v > 31) c.fail("shift amount out of range");
            i.shamt = static_cast<uint8_t>(v);
        }
        break;
    case Format::Mem:
        i.rt = c.reg();
        c.expect(',');
        i.imm = c.imm16("memory offset");
        c.expect('(');
        i.rs = c.reg();
        c.expect(')');
        break;
    case Format::ArithImm:
        i.rt = c.reg();
        c.expect(',');
        i.rs = c.reg();
        c.expect(',');
        i.imm = c.imm16("immediate");
        break;
    case Format::LoadUpper:
        i.rt = c.reg();
        c.expect(',');
        i.imm = c.imm16("immediate");
        break;
    case Format::Branch:
        i.rs = c.reg();
        c.expect(',');
        i.rt = c.reg();
        c.expect(',');
        i.imm = branch_offset(index);
        break;
    case Format::Jump:
        i.jump_target = jump_target();
        break;
    case Format::JumpReg:
        i.rs = c.reg();
        break;
    }
    if (!c.at_end()) c.fail("trailing characters after instruction");
    validate_instruction(i);
    return i;
}

std::string format_asm(const Instruction& i) {
    std::ostringstream out;
    out << mnemonic_name(i.op);
    auto r = [](unsigned n) { return "r" + std::to_string(n); };
    switch (format_of(i.op)) {
    case Format::None:
        break;
    case Format::Reg3:
        out << ' ' << r(i.rd) << ", " << r(i.rs) << ", " << r(i.rt);
        break;
    case Format::Shift:
        out << ' ' << r(i.rd) << ", " << r(i.rt) << ", " << static_cast<int>(i.shamt);
        break;
    case Format::Mem:
        out << ' ' << r(i.rt) << ", " << i.imm << '(' << r(i.rs) << ')';
        break;
    case Format::ArithImm:
        out << ' ' << r(i.rt) << ", " << r(i.rs) << ", " << i.imm;
        break;
    case Format::LoadUpper:
        out << ' ' << r(i.rt) << ", " << i.imm;
        break;
    case Format::Branch:
        out << ' ' << r(i.rs) << ", " << r(i.rt) << ", " << i.imm;
        break;
    case Format::Jump:
        out << ' ' << i.jump_target;
        break;
    case Format::JumpReg:
        out << ' ' << r(i.rs);
        break;
    }
    return out.str();
}

namespace {

// Splits a line into an optional sequence of `label:` prefixes and the rest.
std::string_view peel_labels(std::string_view line, int line_no,
                             const std::function<void(std::string_view)>& on_label) {
    for (;;) {
        std::size_t i = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) ||
                                   line[i] == '_'))
            ++i;
        std::size_t after = i;
        while (after < line.size() && (line[after] == ' ' || line[after] == '\t')) ++after;
        if (i > start && after < line.size() && line[after] == ':') {
            std::string_view label = line.substr(start, i - start);
            if (std::isdigit(static_cast<unsigned char>(label[0])))
                throw ParseError("label must not start with a digit", line_no,
                                 static_cast<int>(start) + 1);
            on_label(label);
            line = line.substr(after + 1);
            continue;
        }
        return line;
    }
}

} // namespace

Program parse_program(std::string_view text) {
    struct Line {
        std::string_view body;
        int no;
        uint32_t index;
    };
    std::vector<Line> lines;
    std::map<std::string, uint32_t, std::less<>> labels;

    // Pass 1: collect labels and instruction-bearing lines.
    uint32_t index = 0;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                              : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        std::string_view body = strip_comment(raw);
        body = peel_labels(body, line_no, [&](std::string_view label) {
            auto [it, inserted] = labels.emplace(std::string(label), index);
            if (!inserted)
                throw ParseError("duplicate label '" + std::string(label) + "'", line_no);
        });
        std::size_t i = 0;
        while (i < body.size() && (body[i] == ' ' || body[i] == '\t')) ++i;
        if (i == body.size()) continue;
        lines.push_back({body, line_no, index});
        ++index;
    }

    LabelResolver resolve = [&](std::string_view name) -> std::optional<uint32_t> {
        auto it = labels.find(name);
        if (it == labels.end()) return std::nullopt;
        return it->second;
    };

    Program prog;
    prog.code.reserve(lines.size());
    for (const Line& l : lines)
        prog.code.push_back(parse_asm(l.body, l.index, resolve, l.no));
    return prog;
}

std::string format_program(const Program& prog) {
    std::string out;
    for (const Instruction& i : prog.code) {
        out += format_asm(i);
        out += '\n';
    }
    return out;
}

} // namespace vli
