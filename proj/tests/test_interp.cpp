#include <map>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "vli/interp.hpp"

using namespace vli;

namespace {

// Independent big-step evaluator for straight-line arithmetic programs.
// Deliberately structured differently from run(): evaluates into a map and
// never models pc.
std::map<int, uint32_t> naive_eval(const std::vector<Instruction>& code) {
    std::map<int, uint32_t> regs;
    auto get = [&](uint8_t r) -> uint32_t { return r == 0 ? 0 : regs[r]; };
    std::map<uint32_t, uint32_t> mem;
    for (const Instruction& i : code) {
        switch (i.op) {
        case Mnemonic::ADDIU:
            if (i.rt) regs[i.rt] = get(i.rs) + static_cast<int32_t>(i.imm);
            break;
        case Mnemonic::ADDU:
            if (i.rd) regs[i.rd] = get(i.rs) + get(i.rt);
            break;
        case Mnemonic::SLL:
            if (i.rd) regs[i.rd] = get(i.rt) << i.shamt;
            break;
        case Mnemonic::ORI:
            if (i.rt) regs[i.rt] = get(i.rs) | static_cast<uint16_t>(i.imm);
            break;
        case Mnemonic::LUI:
            if (i.rt) regs[i.rt] = static_cast<uint32_t>(static_cast<uint16_t>(i.imm)) << 16;
            break;
        case Mnemonic::SLT:
            if (i.rd)
                regs[i.rd] = static_cast<int32_t>(get(i.rs)) < static_cast<int32_t>(get(i.rt));
            break;
        case Mnemonic::LW:
            if (i.rt) regs[i.rt] = mem[get(i.rs) + static_cast<int32_t>(i.imm)];
            break;
        case Mnemonic::SW:
            mem[get(i.rs) + static_cast<int32_t>(i.imm)] = get(i.rt);
            break;
        default:
            break;
        }
    }
    return regs;
}

} // namespace

TEST_CASE("addiu writes through the zero-register rule") {
    Program p = parse_program("ADDIU r1, r0, 5\nHALT\n");
    RunResult r = run(p);
    CHECK(r.state.regs[1] == 5);
    CHECK(r.trace.entries.size() == 2);
    CHECK(!r.trace.truncated);

    // writes to r0 are ignored
    Program z = parse_program("ADDIU r0, r0, 9\nHALT\n");
    CHECK(run(z).state.regs[0] == 0);
}

TEST_CASE("countdown loop produces taken,taken,not-taken") {
    Program p = parse_program(
        "      ADDIU r1, r0, 3\n"
        "loop: ADDIU r1, r1, -1\n"
        "      BNE r1, r0, loop\n"
        "      HALT\n");
    RunResult r = run(p);
    std::vector<BranchOutcome> outcomes;
    for (const TraceEntry& e : r.trace.entries)
        if (e.instr.op == Mnemonic::BNE) outcomes.push_back(e.outcome);
    REQUIRE(outcomes.size() == 3);
    CHECK(outcomes[0] == BranchOutcome::Taken);
    CHECK(outcomes[1] == BranchOutcome::Taken);
    CHECK(outcomes[2] == BranchOutcome::NotTaken);
    CHECK(r.state.regs[1] == 0);
}

TEST_CASE("branch outcomes appear exactly on branch-class entries") {
    std::mt19937_64 rng(31);
    Program p = testgen::random_branchy_program(rng, 200);
    RunResult r = run(p, {}, 100000);
    for (const TraceEntry& e : r.trace.entries) {
        if (is_branch_class(e.instr.op))
            CHECK(e.outcome != BranchOutcome::NotABranch);
        else
            CHECK(e.outcome == BranchOutcome::NotABranch);
        if (e.outcome == BranchOutcome::Taken) CHECK(e.target < p.code.size());
    }
}

TEST_CASE("random straight-line programs match the naive evaluator") {
    std::mt19937_64 rng(32);
    for (int round = 0; round < 50; ++round) {
        Program p;
        auto reg = [&] { return static_cast<uint8_t>(rng() % 16); };
        for (int k = 0; k < 200; ++k) {
            switch (rng() % 6) {
            case 0:
                p.code.push_back(make_addiu(reg(), reg(), static_cast<int16_t>(rng() % 1000)));
                break;
            case 1:
                p.code.push_back(make_addu(reg(), reg(), reg()));
                break;
            case 2:
                p.code.push_back(make_sll(reg(), reg(), static_cast<uint8_t>(rng() % 16)));
                break;
            case 3:
                p.code.push_back(make_ori(reg(), reg(), static_cast<int16_t>(rng() % 512)));
                break;
            case 4:
                p.code.push_back(make_lui(reg(), static_cast<int16_t>(rng() % 100)));
                break;
            default:
                p.code.push_back(make_slt(reg(), reg(), reg()));
                break;
            }
        }
        p.code.push_back(make_halt());
        RunResult r = run(p);
        auto expect = naive_eval(p.code);
        for (int reg_no = 0; reg_no < 32; ++reg_no) {
            uint32_t want = expect.count(reg_no) ? expect[reg_no] : 0;
            CAPTURE(round);
            CAPTURE(reg_no);
            CHECK(r.state.regs[reg_no] == want);
        }
    }
}

TEST_CASE("memory faults on unaligned access") {
    Program p = parse_program("LW r1, 2(r0)\nHALT\n");
    CHECK_THROWS_AS(run(p), SimFault);
    p = parse_program("SW r1, 3(r0)\nHALT\n");
    CHECK_THROWS_AS(run(p), SimFault);
}

TEST_CASE("running off the end of the program faults") {
    Program p = parse_program("NOP\nNOP\n");
    CHECK_THROWS_AS(run(p), SimFault);
}

TEST_CASE("step limit truncates the trace") {
    Program p = parse_program("loop: J loop\n");
    RunResult r = run(p, {}, 100);
    CHECK(r.trace.truncated);
    CHECK(r.trace.entries.size() == 100);
}

TEST_CASE("determinism: identical runs produce identical traces") {
    std::mt19937_64 rng(33);
    Program p = testgen::random_branchy_program(rng, 150);
    RunResult a = run(p);
    RunResult b = run(p);
    REQUIRE(a.trace.entries.size() == b.trace.entries.size());
    for (std::size_t k = 0; k < a.trace.entries.size(); ++k) {
        CHECK(a.trace.entries[k].index == b.trace.entries[k].index);
        CHECK(a.trace.entries[k].instr == b.trace.entries[k].instr);
        CHECK(a.trace.entries[k].outcome == b.trace.entries[k].outcome);
    }
    CHECK(format_trace(a.trace) == format_trace(b.trace));
}

TEST_CASE("trace replay reconstructs the pc sequence") {
    std::mt19937_64 rng(34);
    Program p = testgen::random_branchy_program(rng, 200);
    RunResult r = run(p, {}, 100000);
    uint32_t pc = 0;
    for (const TraceEntry& e : r.trace.entries) {
        CHECK(e.index == pc);
        if (e.outcome == BranchOutcome::Taken)
            pc = e.target;
        else
            pc = e.index + 1;
    }
}

TEST_CASE("degenerate mix: all addu") {
    FreqTable t = {{Mnemonic::ADDU, 10000}};
    Program p = gen_mix(t, 10, 7);
    REQUIRE(p.code.size() == 11);
    for (int k = 0; k < 10; ++k) CHECK(p.code[k].op == Mnemonic::ADDU);
    CHECK(p.code[10] == make_halt());
}

TEST_CASE("reference mix histogram is exact at n=100000") {
    Program p = gen_mix(testgen::reference_mix_table(), 100000, 42);
    REQUIRE(p.code.size() == 100001);
    CHECK(p.code.back() == make_halt());

    // brute-force recount
    std::map<Mnemonic, uint64_t> hist;
    for (std::size_t k = 0; k + 1 < p.code.size(); ++k) hist[p.code[k].op]++;
    CHECK(hist[Mnemonic::ADDU] == 21930);
    CHECK(hist[Mnemonic::LW] == 10400);
    CHECK(hist[Mnemonic::ADDIU] == 4530);
    CHECK(hist[Mnemonic::SW] == 2250);
    CHECK(hist[Mnemonic::SLL] == 5410);
    CHECK(hist[Mnemonic::BEQ] == 4060);
    CHECK(hist[Mnemonic::BNE] == 2040);
    double addu_frac = static_cast<double>(hist[Mnemonic::ADDU]) / 100000.0;
    CHECK(addu_frac == doctest::Approx(0.2193).epsilon(0.005));

    // the mix runs straight through: no branch is ever taken
    RunResult r = run(p, {}, 200000);
    CHECK(!r.trace.truncated);
    CHECK(r.trace.entries.size() == p.code.size());
    for (const TraceEntry& e : r.trace.entries) CHECK(e.outcome != BranchOutcome::Taken);
}

TEST_CASE("mix arguments stay within the default lut capacities") {
    Program p = gen_mix(testgen::reference_mix_table(), 20000, 9);
    Profile prof = build_profile(p.code);
    SchemeLayout layout = SchemeLayout::default_layout();
    for (Mnemonic m : short_eligible_mnemonics()) {
        CHECK(prof.reg_marginal(m).size() <= layout.shape(m).reg_capacity());
        if (layout.shape(m).has_imm_table)
            CHECK(prof.imm_marginal(m).size() <= layout.shape(m).imm_capacity());
    }
}

TEST_CASE("mix determinism and seed sensitivity") {
    FreqTable t = testgen::reference_mix_table();
    Program a = gen_mix(t, 5000, 1);
    Program b = gen_mix(t, 5000, 1);
    Program c = gen_mix(t, 5000, 2);
    CHECK(a == b);
    CHECK(a.code != c.code);
}

TEST_CASE("mix rejects bad tables") {
    CHECK_THROWS_AS(gen_mix({{Mnemonic::ADDU, 10001}}, 100, 0), ConfigError);
    CHECK_THROWS_AS(gen_mix({{Mnemonic::J, 100}}, 100, 0), ConfigError);
    CHECK_THROWS_AS(gen_mix({{Mnemonic::HALT, 100}}, 100, 0), ConfigError);
    CHECK_THROWS_AS(gen_mix({{Mnemonic::ADDU, 100}}, 0, 0), ConfigError);
}
