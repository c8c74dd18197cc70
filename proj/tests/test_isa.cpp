#include <random>

#include "doctest.h"
#include "vli/isa.hpp"

using namespace vli;

namespace {

// Uniformly random valid instruction over the full subset.
Instruction random_instruction(std::mt19937_64& rng) {
    auto reg = [&] { return static_cast<uint8_t>(rng() % 32); };
    auto imm = [&] { return static_cast<int16_t>(rng() & 0xffff); };
    switch (rng() % 14) {
    case 0:
        return make_nop();
    case 1:
        return make_lw(reg(), imm(), reg());
    case 2:
        return make_sw(reg(), imm(), reg());
    case 3:
        return make_addiu(reg(), reg(), imm());
    case 4:
        return make_addu(reg(), reg(), reg());
    case 5:
        return make_sll(reg(), reg(), static_cast<uint8_t>(rng() % 32));
    case 6:
        return make_beq(reg(), reg(), imm());
    case 7:
        return make_bne(reg(), reg(), imm());
    case 8:
        return make_lui(reg(), imm());
    case 9:
        return make_ori(reg(), reg(), imm());
    case 10:
        return make_slt(reg(), reg(), reg());
    case 11:
        return make_j(static_cast<uint32_t>(rng() % (1u << 26)));
    case 12:
        return make_jr(reg());
    default:
        return make_halt();
    }
}

} // namespace

TEST_CASE("nop encodes to the bare marker word") {
    CHECK(encode_full(make_nop()).bits == 0x80000000u);
    CHECK(decode_full(FullWord{0x80000000u}) == make_nop());
}

TEST_CASE("every full word has the marker bit set") {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 1000; ++k)
        CHECK((encode_full(random_instruction(rng)).bits & 0x80000000u) != 0);
}

TEST_CASE("decode rejects words without the marker bit") {
    CHECK_THROWS_AS(decode_full(FullWord{0x00000000u}), DecodeError);
    CHECK_THROWS_AS(decode_full(FullWord{0x7fffffffu}), DecodeError);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 1000; ++k)
        CHECK_THROWS_AS(decode_full(FullWord{static_cast<uint32_t>(rng()) & 0x7fffffffu}),
                        DecodeError);
}

TEST_CASE("decode rejects unknown opcodes and reserved bits") {
    // opcode ids 14..31 are unused
    CHECK_THROWS_AS(decode_full(FullWord{0x80000000u | (20u << 26)}), DecodeError);
    // NOP with garbage in the payload
    CHECK_THROWS_AS(decode_full(FullWord{0x80000001u}), DecodeError);
    // ADDU (Reg3) with bits 5..0 set
    uint32_t addu = encode_full(make_addu(1, 2, 3)).bits;
    CHECK_THROWS_AS(decode_full(FullWord{addu | 0x1u}), DecodeError);
}

TEST_CASE("encode/decode roundtrip on 10000 random instructions") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 10000; ++k) {
        Instruction i = random_instruction(rng);
        CAPTURE(format_asm(i));
        Instruction back = decode_full(encode_full(i));
        CHECK(back == i);
    }
}

TEST_CASE("decode/encode is the identity on valid words") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 10000; ++k) {
        FullWord w = encode_full(random_instruction(rng));
        CHECK(encode_full(decode_full(w)) == w);
    }
}

TEST_CASE("encode rejects out-of-range fields") {
    Instruction i = make_addu(3, 1, 2);
    i.rd = 32;
    CHECK_THROWS_AS(encode_full(i), EncodeError);
    i = make_sll(1, 2, 3);
    i.shamt = 40;
    CHECK_THROWS_AS(encode_full(i), EncodeError);
    i = make_j(0);
    i.jump_target = 1u << 26;
    CHECK_THROWS_AS(encode_full(i), EncodeError);
    // unused field nonzero
    i = make_addu(3, 1, 2);
    i.imm = 5;
    CHECK_THROWS_AS(encode_full(i), EncodeError);
}

TEST_CASE("parse_asm maps operands to fields") {
    CHECK(parse_asm("ADDU r3, r1, r2") == make_addu(3, 1, 2));
    CHECK(parse_asm("LW r5, 8(r29)") == make_lw(5, 8, 29));
    CHECK(parse_asm("SW r5, -4(r29)") == make_sw(5, -4, 29));
    CHECK(parse_asm("ADDIU r1, r0, 5") == make_addiu(1, 0, 5));
    CHECK(parse_asm("SLL r2, r3, 4") == make_sll(2, 3, 4));
    CHECK(parse_asm("BEQ r1, r2, -3") == make_beq(1, 2, -3));
    CHECK(parse_asm("BNE r1, r2, 7") == make_bne(1, 2, 7));
    CHECK(parse_asm("LUI r4, 100") == make_lui(4, 100));
    CHECK(parse_asm("ORI r4, r5, 0x10") == make_ori(4, 5, 16));
    CHECK(parse_asm("SLT r1, r2, r3") == make_slt(1, 2, 3));
    CHECK(parse_asm("J 12") == make_j(12));
    CHECK(parse_asm("JR r31") == make_jr(31));
    CHECK(parse_asm("NOP") == make_nop());
    CHECK(parse_asm("HALT") == make_halt());
}

TEST_CASE("parse_asm rejects bad registers and syntax") {
    CHECK_THROWS_AS(parse_asm("ADDU r32, r1, r2"), ParseError);
    CHECK_THROWS_AS(parse_asm("ADDU r3 r1 r2"), ParseError);
    CHECK_THROWS_AS(parse_asm("FROB r1, r2"), ParseError);
    CHECK_THROWS_AS(parse_asm(""), ParseError);
    CHECK_THROWS_AS(parse_asm("LW r5, 8(r29) junk"), ParseError);
    try {
        parse_asm("ADDU r99, r1, r2", 0, nullptr, 7);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 7);
        CHECK(e.column > 0);
    }
}

TEST_CASE("text roundtrip: parse_asm(format_asm(i)) == i") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 2000; ++k) {
        Instruction i = random_instruction(rng);
        CAPTURE(format_asm(i));
        CHECK(parse_asm(format_asm(i)) == i);
    }
}

TEST_CASE("parse_program resolves labels to relative offsets") {
    const char* text =
        "# countdown\n"
        "      ADDIU r1, r0, 3\n"
        "loop: ADDIU r1, r1, -1\n"
        "      BNE r1, r0, loop\n"
        "      J end\n"
        "end:  HALT\n";
    Program p = parse_program(text);
    REQUIRE(p.code.size() == 5);
    CHECK(p.code[1] == make_addiu(1, 1, -1));
    CHECK(p.code[2] == make_bne(1, 0, -2)); // back to index 1
    CHECK(p.code[3] == make_j(4));
    CHECK(p.code[4] == make_halt());
}

TEST_CASE("parse_program: labels on their own line and duplicates") {
    Program p = parse_program("start:\n  NOP\n  J start\n  HALT\n");
    REQUIRE(p.code.size() == 3);
    CHECK(p.code[1] == make_j(0));
    CHECK_THROWS_AS(parse_program("a: NOP\na: NOP\n"), ParseError);
    CHECK_THROWS_AS(parse_program("J nowhere\n"), ParseError);
}

TEST_CASE("program text roundtrip") {
    std::mt19937_64 rng(6);
    Program p;
    for (int k = 0; k < 100; ++k) {
        Instruction i = random_instruction(rng);
        // keep jumps/branches in range so the text stays parseable
        if (i.op == Mnemonic::J) i.jump_target = static_cast<uint32_t>(rng() % 100);
        p.code.push_back(i);
    }
    CHECK(parse_program(format_program(p)) == p);
}
