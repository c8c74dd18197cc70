#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vli/isa.hpp"
#include "vli/profile.hpp"

namespace vli {

// Architectural state of the functional interpreter. pc is an instruction
// index; memory is a sparse word-addressed map (unwritten words read 0).
struct MachineState {
    std::array<uint32_t, 32> regs{};
    std::map<uint32_t, uint32_t> mem;
    uint32_t pc = 0;
    uint64_t steps = 0;
};

enum class BranchOutcome : uint8_t { NotABranch, Taken, NotTaken };

struct TraceEntry {
    uint32_t index = 0;
    Instruction instr;
    BranchOutcome outcome = BranchOutcome::NotABranch;
    // Instruction index the branch went to; meaningful only when Taken.
    // Needed so JR redirects can be replayed without re-executing.
    uint32_t target = 0;
};

struct DynTrace {
    std::vector<TraceEntry> entries;
    bool truncated = false;
};

struct RunResult {
    MachineState state;
    DynTrace trace;
};

// Sequential semantics, no delay slots. Stops at HALT or after step_limit
// executed instructions (the trace is then flagged truncated). Throws
// SimFault on unaligned memory access or a pc outside the program.
RunResult run(const Program& program, MachineState initial = {}, uint64_t step_limit = 10'000'000);

// `idx mnemonic outcome` lines, for diffing.
std::string format_trace(const DynTrace& trace);

// Deterministic synthetic workload: a straight-line program (plus HALT) whose
// mnemonic histogram matches the frequency table (basis points); the
// remainder is assigned round-robin to the full-length-only fillers
// ORI/SLT/LUI. Argument tuples are drawn from small fixed pools sized to the
// default LUT capacities, so a scheme built from the program's own profile
// keeps every argument resident. Branches compare registers the generated
// code keeps unequal (BEQ) or use one register twice (BNE) and target the
// next instruction, so generated programs never take a branch.
Program gen_mix(const FreqTable& freqs_bp, uint64_t n, uint64_t seed);

} // namespace vli
