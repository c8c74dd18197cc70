#include "vli/interp.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace vli {

namespace {

uint32_t read_reg(const MachineState& s, uint8_t r) {
    return r == 0 ? 0 : s.regs[r];
}

void write_reg(MachineState& s, uint8_t r, uint32_t v) {
    if (r != 0) s.regs[r] = v;
}

uint32_t load_word(MachineState& s, uint32_t addr) {
    if (addr % 4 != 0)
        throw SimFault("unaligned load at 0x" + std::to_string(addr));
    auto it = s.mem.find(addr);
    return it == s.mem.end() ? 0 : it->second;
}

void store_word(MachineState& s, uint32_t addr, uint32_t v) {
    if (addr % 4 != 0)
        throw SimFault("unaligned store at 0x" + std::to_string(addr));
    s.mem[addr] = v;
}

} // namespace

RunResult run(const Program& program, MachineState initial, uint64_t step_limit) {
    RunResult result;
    result.state = std::move(initial);
    MachineState& s = result.state;
    const auto& code = program.code;

    while (true) {
        if (s.steps >= step_limit) {
            result.trace.truncated = true;
            break;
        }
        if (s.pc >= code.size())
            throw SimFault("pc " + std::to_string(s.pc) + " outside the program");
        const Instruction& i = code[s.pc];
        TraceEntry entry;
        entry.index = s.pc;
        entry.instr = i;
        uint32_t next = s.pc + 1;
        bool done = false;

        switch (i.op) {
        case Mnemonic::NOP:
            break;
        case Mnemonic::HALT:
            done = true;
            break;
        case Mnemonic::LW:
            write_reg(s, i.rt, load_word(s, read_reg(s, i.rs) + static_cast<int32_t>(i.imm)));
            break;
        case Mnemonic::SW:
            store_word(s, read_reg(s, i.rs) + static_cast<int32_t>(i.imm), read_reg(s, i.rt));
            break;
        case Mnemonic::ADDIU:
            write_reg(s, i.rt, read_reg(s, i.rs) + static_cast<int32_t>(i.imm));
            break;
        case Mnemonic::ADDU:
            write_reg(s, i.rd, read_reg(s, i.rs) + read_reg(s, i.rt));
            break;
        case Mnemonic::SLL:
            write_reg(s, i.rd, read_reg(s, i.rt) << i.shamt);
            break;
        case Mnemonic::BEQ:
        case Mnemonic::BNE: {
            bool equal = read_reg(s, i.rs) == read_reg(s, i.rt);
            bool taken = (i.op == Mnemonic::BEQ) ? equal : !equal;
            entry.outcome = taken ? BranchOutcome::Taken : BranchOutcome::NotTaken;
            if (taken) {
                int64_t tgt = static_cast<int64_t>(s.pc) + 1 + i.imm;
                if (tgt < 0 || tgt >= static_cast<int64_t>(code.size()))
                    throw SimFault("branch target outside the program");
                next = static_cast<uint32_t>(tgt);
                entry.target = next;
            }
            break;
        }
        case Mnemonic::LUI:
            write_reg(s, i.rt, static_cast<uint32_t>(static_cast<uint16_t>(i.imm)) << 16);
            break;
        case Mnemonic::ORI:
            write_reg(s, i.rt, read_reg(s, i.rs) | static_cast<uint16_t>(i.imm));
            break;
        case Mnemonic::SLT:
            write_reg(s, i.rd,
                      static_cast<int32_t>(read_reg(s, i.rs)) <
                              static_cast<int32_t>(read_reg(s, i.rt))
                          ? 1
                          : 0);
            break;
        case Mnemonic::J:
            if (i.jump_target >= code.size())
                throw SimFault("jump target outside the program");
            next = i.jump_target;
            entry.outcome = BranchOutcome::Taken;
            entry.target = next;
            break;
        case Mnemonic::JR: {
            uint32_t tgt = read_reg(s, i.rs);
            if (tgt >= code.size())
                throw SimFault("jr target outside the program");
            next = tgt;
            entry.outcome = BranchOutcome::Taken;
            entry.target = next;
            break;
        }
        }

        result.trace.entries.push_back(entry);
        ++s.steps;
        if (done) break;
        s.pc = next;
    }
    return result;
}

std::string format_trace(const DynTrace& trace) {
    std::ostringstream out;
    for (const TraceEntry& e : trace.entries) {
        out << e.index << ' ' << mnemonic_name(e.instr.op) << ' ';
        switch (e.outcome) {
        case BranchOutcome::NotABranch:
            out << '-';
            break;
        case BranchOutcome::Taken:
            out << "taken";
            break;
        case BranchOutcome::NotTaken:
            out << "not-taken";
            break;
        }
        out << '\n';
    }
    if (trace.truncated) out << "# truncated\n";
    return out.str();
}

// --- synthetic mixes ---------------------------------------------------------

namespace {

// Argument pools. Registers r0..r6 are never written by generated code
// (except r1/r2, set once by the preamble to known nonzero values), so
// BEQ pairs against r0 stay unequal and memory bases stay 0 (aligned).
struct ArgPools {
    std::vector<RegCombo> lw, sw, addiu, sll, addu, beq, bne;
};

RegCombo combo2(uint8_t a, uint8_t b) {
    RegCombo c;
    c.regs = {a, b, 0};
    c.arity = 2;
    return c;
}

RegCombo combo3(uint8_t a, uint8_t b, uint8_t d) {
    RegCombo c;
    c.regs = {a, b, d};
    c.arity = 3;
    return c;
}

ArgPools default_pools() {
    ArgPools p;
    // LW: 4 reg pairs (rt, rs); bases read 0, so addresses stay aligned.
    for (uint8_t rt : {8, 9, 10, 11})
        p.lw.push_back(combo2(rt, static_cast<uint8_t>(rt % 2 == 0 ? 0 : 4)));
    // SW: 4 reg pairs.
    for (uint8_t rt : {8, 9, 12, 13})
        p.sw.push_back(combo2(rt, static_cast<uint8_t>(rt < 12 ? 0 : 5)));
    // ADDIU: 8 reg pairs (rt, rs); (1,0) and (2,0) double as the preamble.
    p.addiu = {combo2(1, 0),  combo2(2, 0),  combo2(8, 0),  combo2(9, 1),
               combo2(10, 2), combo2(11, 8), combo2(12, 9), combo2(13, 10)};
    // SLL: 4 reg pairs (rd, rt).
    p.sll = {combo2(8, 8), combo2(9, 9), combo2(10, 11), combo2(11, 10)};
    // ADDU: 16 reg triples (rd, rs, rt), rd in the writable range.
    for (uint8_t k = 0; k < 16; ++k)
        p.addu.push_back(combo3(static_cast<uint8_t>(8 + (k % 8)),
                                static_cast<uint8_t>(8 + ((k + 3) % 8)),
                                static_cast<uint8_t>(k < 8 ? 0 : 1)));
    // BEQ: pairs guaranteed unequal at runtime (r1, r2 hold small nonzero
    // values after the preamble; every later write keeps them nonzero).
    p.beq = {combo2(0, 1), combo2(0, 2), combo2(1, 0), combo2(2, 0)};
    // BNE: the same register twice is always equal, so never taken.
    p.bne = {combo2(3, 3), combo2(4, 4), combo2(5, 5), combo2(6, 6)};
    return p;
}

const std::array<int16_t, 8> kLwImms = {0, 4, 8, 12, 16, 20, 24, 28};
const std::array<int16_t, 4> kSwImms = {0, 4, 8, 12};
const std::array<int16_t, 4> kAddiuImms = {1, 2, 4, 8};
const std::array<int16_t, 4> kSllShamts = {0, 1, 2, 3};

const std::array<Mnemonic, 3> kFillers = {Mnemonic::ORI, Mnemonic::SLT, Mnemonic::LUI};

} // namespace

Program gen_mix(const FreqTable& freqs_bp, uint64_t n, uint64_t seed) {
    constexpr uint64_t kFullScale = 10000;
    uint64_t listed = 0;
    std::map<Mnemonic, uint64_t> bp;
    for (const auto& [m, v] : freqs_bp) {
        if (m == Mnemonic::HALT || m == Mnemonic::J || m == Mnemonic::JR)
            throw ConfigError("mix table may not contain HALT/J/JR");
        bp[m] += v;
        listed += v;
    }
    if (listed > kFullScale) throw ConfigError("mix frequencies exceed 100%");
    if (n == 0) throw ConfigError("mix length must be positive");

    // Largest-remainder apportionment so the histogram is exact.
    std::map<Mnemonic, uint64_t> counts;
    uint64_t assigned = 0;
    std::vector<std::pair<uint64_t, Mnemonic>> remainders; // (remainder, mnemonic)
    for (const auto& [m, v] : bp) {
        uint64_t exact_num = v * n;
        counts[m] = exact_num / kFullScale;
        assigned += counts[m];
        remainders.emplace_back(exact_num % kFullScale, m);
    }
    uint64_t filler_total = 0;
    {
        uint64_t v = kFullScale - listed;
        uint64_t exact_num = v * n;
        filler_total = exact_num / kFullScale;
        assigned += filler_total;
        remainders.emplace_back(exact_num % kFullScale, Mnemonic::HALT); // sentinel for filler
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
        Mnemonic m = remainders[k % remainders.size()].second;
        if (m == Mnemonic::HALT)
            ++filler_total;
        else
            ++counts[m];
    }

    ArgPools pools = default_pools();
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t size) { return static_cast<std::size_t>(rng() % size); };

    // The preamble gives BEQ operands known nonzero values; it is carved out
    // of the ADDIU budget when possible so the histogram stays exact.
    std::vector<Instruction> preamble;
    if (counts[Mnemonic::BEQ] > 0) {
        preamble.push_back(make_addiu(1, 0, 1));
        preamble.push_back(make_addiu(2, 0, 2));
        uint64_t carve = std::min<uint64_t>(2, counts[Mnemonic::ADDIU]);
        counts[Mnemonic::ADDIU] -= carve;
    }

    std::vector<Mnemonic> body;
    body.reserve(n);
    for (const auto& [m, count] : counts)
        for (uint64_t k = 0; k < count; ++k) body.push_back(m);
    for (uint64_t k = 0; k < filler_total; ++k) body.push_back(kFillers[k % kFillers.size()]);
    // Fisher-Yates with explicit draws; std::shuffle is not reproducible
    // across standard libraries.
    for (std::size_t k = body.size(); k > 1; --k)
        std::swap(body[k - 1], body[rng() % k]);

    Program prog;
    prog.code.reserve(body.size() + preamble.size() + 1);
    for (const Instruction& i : preamble) prog.code.push_back(i);
    for (Mnemonic m : body) {
        Instruction i;
        i.op = m;
        switch (m) {
        case Mnemonic::LW: {
            apply_reg_combo(i, pools.lw[pick(pools.lw.size())]);
            i.imm = kLwImms[pick(kLwImms.size())];
            break;
        }
        case Mnemonic::SW: {
            apply_reg_combo(i, pools.sw[pick(pools.sw.size())]);
            i.imm = kSwImms[pick(kSwImms.size())];
            break;
        }
        case Mnemonic::ADDIU: {
            apply_reg_combo(i, pools.addiu[pick(pools.addiu.size())]);
            i.imm = kAddiuImms[pick(kAddiuImms.size())];
            break;
        }
        case Mnemonic::SLL: {
            apply_reg_combo(i, pools.sll[pick(pools.sll.size())]);
            i.shamt = static_cast<uint8_t>(kSllShamts[pick(kSllShamts.size())]);
            break;
        }
        case Mnemonic::ADDU:
            apply_reg_combo(i, pools.addu[pick(pools.addu.size())]);
            break;
        case Mnemonic::BEQ:
            apply_reg_combo(i, pools.beq[pick(pools.beq.size())]);
            i.imm = 0; // next instruction; never taken anyway
            break;
        case Mnemonic::BNE:
            apply_reg_combo(i, pools.bne[pick(pools.bne.size())]);
            i.imm = 0;
            break;
        case Mnemonic::ORI:
            i.rt = static_cast<uint8_t>(8 + pick(8));
            i.rs = static_cast<uint8_t>(8 + pick(8));
            i.imm = static_cast<int16_t>(pick(256));
            break;
        case Mnemonic::SLT:
            apply_reg_combo(i, combo3(static_cast<uint8_t>(8 + pick(8)),
                                      static_cast<uint8_t>(8 + pick(8)),
                                      static_cast<uint8_t>(pick(16))));
            break;
        case Mnemonic::LUI:
            i.rt = static_cast<uint8_t>(8 + pick(8));
            i.imm = static_cast<int16_t>(pick(1024));
            break;
        case Mnemonic::NOP:
            break;
        default:
            throw ConfigError("mix table may not contain " + std::string(mnemonic_name(m)));
        }
        prog.code.push_back(i);
    }
    prog.code.push_back(make_halt());
    return prog;
}

} // namespace vli
