#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vli/errors.hpp"

namespace vli {

// MIPS-style subset. The container reserves a 5-bit opcode field, so at most
// 32 mnemonics. NOP must stay at id 0 (an all-zero payload full word is NOP).
enum class Mnemonic : uint8_t {
    NOP = 0,
    LW,
    SW,
    ADDIU,
    ADDU,
    SLL,
    BEQ,
    BNE,
    LUI,
    ORI,
    SLT,
    J,
    JR,
    HALT,
};

inline constexpr std::size_t kMnemonicCount = 14;
static_assert(kMnemonicCount <= 32, "the full-length container has a 5-bit opcode field");

enum class Format : uint8_t {
    None,      // NOP, HALT
    Reg3,      // ADDU/SLT  rd, rs, rt
    Shift,     // SLL       rd, rt, shamt
    Mem,       // LW/SW     rt, imm(rs)
    ArithImm,  // ADDIU/ORI rt, rs, imm
    LoadUpper, // LUI       rt, imm
    Branch,    // BEQ/BNE   rs, rt, offset
    Jump,      // J         target
    JumpReg,   // JR        rs
};

Format format_of(Mnemonic m);
std::string_view mnemonic_name(Mnemonic m);
std::optional<Mnemonic> mnemonic_from_name(std::string_view name);

// True for instructions that can redirect the front-end (BEQ/BNE/J/JR).
bool is_branch_class(Mnemonic m);

// Semantic instruction. Fields unused by the opcode's format stay zero.
// Branch offsets count instructions and are relative to the successor;
// jump targets are absolute instruction indices.
struct Instruction {
    Mnemonic op = Mnemonic::NOP;
    uint8_t rs = 0;
    uint8_t rt = 0;
    uint8_t rd = 0;
    uint8_t shamt = 0;
    int16_t imm = 0;
    uint32_t jump_target = 0; // 26 bits

    bool operator==(const Instruction&) const = default;
};

// Named constructors, mostly for tests and generators.
Instruction make_nop();
Instruction make_halt();
Instruction make_lw(uint8_t rt, int16_t imm, uint8_t rs);
Instruction make_sw(uint8_t rt, int16_t imm, uint8_t rs);
Instruction make_addiu(uint8_t rt, uint8_t rs, int16_t imm);
Instruction make_addu(uint8_t rd, uint8_t rs, uint8_t rt);
Instruction make_sll(uint8_t rd, uint8_t rt, uint8_t shamt);
Instruction make_beq(uint8_t rs, uint8_t rt, int16_t offset);
Instruction make_bne(uint8_t rs, uint8_t rt, int16_t offset);
Instruction make_lui(uint8_t rt, int16_t imm);
Instruction make_ori(uint8_t rt, uint8_t rs, int16_t imm);
Instruction make_slt(uint8_t rd, uint8_t rs, uint8_t rt);
Instruction make_j(uint32_t target);
Instruction make_jr(uint8_t rs);

// Throws EncodeError if a field is out of range for its width or a field
// unused by the format is nonzero.
void validate_instruction(const Instruction& instr);

// Uniform 32-bit container. Bit 31 is always 1 so that every value with a
// leading 0 is free for the short encodings.
struct FullWord {
    uint32_t bits = 0;
    bool operator==(const FullWord&) const = default;
};

FullWord encode_full(const Instruction& instr);
// Rejects words with bit 31 clear, unknown opcode ids, or nonzero bits in
// fields the format does not use (so encode_full(decode_full(w)) == w).
Instruction decode_full(FullWord word);

// --- assembly text ---------------------------------------------------------
//
// One instruction per line, `#` starts a comment, `label:` defines a label.
// Registers are written r0..r31. Branch operands may be a label or a numeric
// instruction offset; jump operands a label or an absolute index.

using LabelResolver = std::function<std::optional<uint32_t>(std::string_view)>;

// Parses a single line with numeric operands only (no labels, no comments).
Instruction parse_asm(std::string_view line);
// Full form: `index` is the instruction's position, used to turn resolved
// label addresses into relative branch offsets. `line_no` only decorates
// error messages.
Instruction parse_asm(std::string_view line, uint32_t index, const LabelResolver& resolve,
                      int line_no = 0);

// Canonical text; parse_asm(format_asm(i)) == i.
std::string format_asm(const Instruction& instr);

struct Program {
    std::vector<Instruction> code;
    bool operator==(const Program&) const = default;
};

Program parse_program(std::string_view text);
std::string format_program(const Program& prog);

} // namespace vli
