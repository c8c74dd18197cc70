#include "vli/frontend_sim.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

namespace vli {

namespace {

bool is_pow2(uint32_t v) {
    return v != 0 && (v & (v - 1)) == 0;
}

} // namespace

BranchUnit::BranchUnit(uint32_t n) {
    if (!is_pow2(n)) throw ConfigError("btb_entries must be a power of two");
    entries.resize(n);
}

uint32_t BranchUnit::index_of(uint32_t chunk_addr) const {
    return (chunk_addr >> 2) & (static_cast<uint32_t>(entries.size()) - 1);
}

uint32_t BranchUnit::tag_of(uint32_t chunk_addr) const {
    return chunk_addr;
}

BranchUnit::Prediction BranchUnit::lookup(uint32_t chunk_addr, uint8_t entry_offset) const {
    const BtbEntry& e = entries[index_of(chunk_addr)];
    if (e.valid && e.tag == tag_of(chunk_addr) && e.counter >= 2 &&
        e.branch_offset >= entry_offset)
        return {true, e.target, e.branch_offset};
    return {};
}

void BranchUnit::update(uint32_t chunk_addr, uint8_t branch_offset, bool taken, uint32_t target) {
    BtbEntry& e = entries[index_of(chunk_addr)];
    if (e.valid && e.tag == tag_of(chunk_addr)) {
        if (taken) {
            e.counter = static_cast<uint8_t>(std::min(3, e.counter + 1));
            e.target = target;
            e.branch_offset = branch_offset;
        } else if (e.counter > 0) {
            --e.counter;
        }
        return;
    }
    if (taken) {
        e.valid = true;
        e.tag = tag_of(chunk_addr);
        e.target = target;
        e.counter = 2;
        e.branch_offset = branch_offset;
    }
}

CacheModel::CacheModel(uint32_t total_bytes, uint32_t line) : line_bytes(line) {
    if (line_bytes < 4 || line_bytes % 4 != 0)
        throw ConfigError("cache line size must be a multiple of 4 bytes");
    if (total_bytes == 0 || total_bytes % line_bytes != 0)
        throw ConfigError("cache size must be a multiple of the line size");
    line_tags.assign(total_bytes / line_bytes, std::nullopt);
}

bool CacheModel::access(uint32_t addr) {
    uint32_t line = addr / line_bytes;
    uint32_t index = line % static_cast<uint32_t>(line_tags.size());
    if (line_tags[index] && *line_tags[index] == line) return true;
    line_tags[index] = line;
    return false;
}

FrontEnd::FrontEnd(const CompressedImage& image, const DynTrace& trace, const SimConfig& config,
                   std::ostream* log)
    : branches(config.btb_entries),
      cache(config.icache_bytes, config.line_bytes),
      image_(&image),
      trace_(&trace),
      config_(config),
      log_(log) {
    fetch.cc = image.entry & ~3u;
    depack.rp = redirect_rp(image.entry);
    depack.pc = image.entry;
    entry_offset_next_ = static_cast<uint8_t>(image.entry & 3);
}

void FrontEnd::check_invariants() const {
    if (fetch.target_reg != write_bit_of(depack.rp))
        throw SimFault("write bit out of sync with the read pointer");
    uint8_t from_rp = depack.valid_from_rp();
    uint8_t total = 0;
    for (bool v : depack.valid) total += v ? 1 : 0;
    if (from_rp != total)
        throw SimFault("valid bytes are not contiguous from the read pointer");
}

void FrontEnd::apply_redirect(uint32_t target_addr) {
    depack.valid.fill(false);
    depack.rp = redirect_rp(target_addr);
    depack.pc = target_addr;
    fetch.cc = target_addr & ~3u;
    fetch.holding = false;
    fetch.miss_active = false;
    fetch.pending_miss = 0;
    entry_offset_next_ = static_cast<uint8_t>(target_addr & 3);
    pending_pred_.reset();
    branches.pending_redirect.reset();
    redirected_this_cycle_ = true;
}

void FrontEnd::resolve_branch(const Instruction& instr, uint32_t byte_addr,
                              const TraceEntry& entry) {
    if (entry.outcome == BranchOutcome::NotABranch)
        throw SimFault("trace/stream divergence: trace entry " +
                       std::to_string(metrics.delivered_instructions - 1) +
                       " is not a branch");
    const uint32_t chunk = byte_addr & ~3u;
    const uint8_t offset = static_cast<uint8_t>(byte_addr & 3);
    const uint32_t fall_through = depack.pc; // already advanced past the branch

    bool actual_taken = entry.outcome == BranchOutcome::Taken;
    uint32_t actual_target = 0;
    if (actual_taken) {
        if (entry.target >= image_->addr_map.size())
            throw SimFault("trace branch target outside the address map");
        actual_target = image_->addr_map[entry.target];
    }

    bool predicted_taken = pending_pred_ && pending_pred_->chunk_addr == chunk;
    if (predicted_taken && pending_pred_->branch_offset != offset)
        throw SimFault("btb predicted a branch at a different offset in this chunk");
    (void)instr;

    if (predicted_taken) {
        uint32_t predicted_target = pending_pred_->target;
        if (actual_taken && actual_target == predicted_target) {
            branches.update(chunk, offset, true, actual_target);
            apply_redirect(actual_target);
            return;
        }
        metrics.mispredict_flushes++;
        penalty_bubbles_ += config_.mispredict_penalty;
        if (actual_taken) {
            branches.update(chunk, offset, true, actual_target);
            apply_redirect(actual_target);
        } else {
            branches.update(chunk, offset, false, 0);
            apply_redirect(fall_through);
        }
        return;
    }

    if (actual_taken) {
        metrics.mispredict_flushes++;
        penalty_bubbles_ += config_.mispredict_penalty;
        branches.update(chunk, offset, true, actual_target);
        apply_redirect(actual_target);
    } else {
        branches.update(chunk, offset, false, 0);
    }
}

bool FrontEnd::depack_step() {
    if (done()) return false;
    uint8_t have = depack.valid_from_rp();
    if (have == 0) {
        depack_starved_ = true;
        return false;
    }

    FirstByteInfo info;
    try {
        info = first_byte_length(depack.q[depack.rp], image_->scheme);
    } catch (const DecodeError& e) {
        throw SimFault(std::string("corrupt image: ") + e.what());
    }
    if (have < info.length) {
        depack_starved_ = true;
        return false;
    }

    if (info.cls == CodeClass::Pad) {
        depack.valid[depack.rp] = false;
        depack.rp = ring_advance(depack.rp, 1);
        depack.pc += 1;
        metrics.pad_skips++;
        metrics.depack_cycles++;
        return true;
    }

    std::array<uint8_t, 4> code{};
    for (uint8_t k = 0; k < info.length; ++k) code[k] = depack.q[ring_advance(depack.rp, k)];
    DecodedAt decoded;
    try {
        decoded = decode_code(std::span<const uint8_t>(code.data(), info.length), depack.pc,
                              *image_);
    } catch (const DecodeError& e) {
        throw SimFault(std::string("corrupt image: ") + e.what());
    }

    const TraceEntry& entry = trace_->entries[delivered_.size()];
    if (entry.index >= image_->addr_map.size() || image_->addr_map[entry.index] != depack.pc)
        throw SimFault("trace/stream divergence at delivered instruction " +
                       std::to_string(delivered_.size()));
    if (!(decoded.instr == entry.instr))
        throw SimFault("trace/stream divergence: depacked " + format_asm(decoded.instr) +
                       " but the trace executed " + format_asm(entry.instr));

    const uint32_t instr_addr = depack.pc;
    for (uint8_t k = 0; k < info.length; ++k) depack.valid[ring_advance(depack.rp, k)] = false;
    depack.rp = ring_advance(depack.rp, info.length);
    depack.pc += info.length;
    depack.out_reg = decoded.instr;
    delivered_.push_back(decoded.instr);
    metrics.delivered_instructions++;
    if (!(decoded.cls == CodeClass::Full && config_.depack_full_bypass)) metrics.depack_cycles++;

    if (is_branch_class(decoded.instr.op)) resolve_branch(decoded.instr, instr_addr, entry);
    return true;
}

void FrontEnd::write_chunk(uint32_t chunk_addr, uint8_t reg) {
    for (int k = 0; k < 4; ++k)
        if (depack.valid[reg * 4 + k])
            throw SimFault("fetch would overwrite an unconsumed byte in register " +
                           std::string(reg == 0 ? "A" : "B"));
    for (uint32_t k = 0; k < 4; ++k) {
        uint32_t addr = chunk_addr + k;
        uint8_t pos = static_cast<uint8_t>(reg * 4 + k);
        depack.q[pos] = addr < image_->bytes.size() ? image_->bytes[addr] : 0;
        // Bytes before the read pointer in its own register were skipped by a
        // mid-chunk redirect; they are never consumed, so they stay invalid.
        bool dead = write_bit_of(depack.rp) == reg && pos < depack.rp;
        depack.valid[pos] = !dead;
    }
    metrics.chunk_fetches++;
    metrics.bytes_fetched += 4;
    metrics.btb_lookups++;

    uint8_t entry_offset = entry_offset_next_;
    entry_offset_next_ = 0;
    BranchUnit::Prediction pred = branches.lookup(chunk_addr, entry_offset);
    if (!fetch.holding && pred.taken) {
        pending_pred_ = PendingPrediction{chunk_addr, pred.target, pred.branch_offset};
        fetch.holding = true;
        branches.pending_redirect = pred.target;
        fetch_note_ += ",predict->0x" + std::to_string(pred.target);
    }
    fetch.cc = chunk_addr + 4;
}

void FrontEnd::fetch_step(const std::array<uint8_t, 2>& occupancy_before) {
    if (fetch.miss_active) {
        metrics.stall_cycles_miss++;
        if (--fetch.pending_miss == 0) {
            fetch.miss_active = false;
            uint8_t reg = fetch.miss_reg;
            fetch_note_ = std::string("fill->") + (reg ? "B" : "A");
            write_chunk(fetch.miss_addr, reg);
        } else {
            fetch_note_ = "stall:miss";
        }
        return;
    }

    bool feeding = false;
    if (fetch.holding) {
        // A predicted-taken branch is in flight. Fetch normally waits for the
        // redirect, but a branch straddling the chunk boundary still needs
        // the next sequential chunk before it can be depacked.
        if (!depack_starved_) {
            fetch_note_ = "hold";
            return;
        }
        feeding = true;
    }

    if (fetch.cc >= image_->bytes.size()) {
        fetch.fetch_enable = false;
        fetch_note_ = "idle";
        return;
    }
    fetch.fetch_enable = true;

    uint8_t wb = fetch.target_reg;
    uint8_t reg;
    if (occupancy_before[wb] == 0) {
        reg = wb;
    } else if (occupancy_before[wb ^ 1] == 0) {
        reg = wb ^ 1;
    } else {
        metrics.stall_cycles_queue_full++;
        fetch_note_ = "stall:queue";
        return;
    }

    uint32_t addr = fetch.cc;
    bool hit = cache.access(addr);
    if (hit) {
        metrics.icache_hits++;
        fetch_note_ = std::string(feeding ? "feed 0x" : "fetch 0x") + to_hex(addr) + "->" +
                      (reg ? "B" : "A") + " hit";
        write_chunk(addr, reg);
    } else {
        metrics.icache_misses++;
        if (config_.miss_latency == 0) {
            fetch_note_ = std::string(feeding ? "feed 0x" : "fetch 0x") + to_hex(addr) + "->" +
                          (reg ? "B" : "A") + " miss";
            write_chunk(addr, reg);
        } else {
            fetch.miss_active = true;
            fetch.miss_addr = addr;
            fetch.miss_reg = reg;
            fetch.pending_miss = config_.miss_latency;
            fetch_note_ = std::string("miss 0x") + to_hex(addr);
        }
    }
}

void FrontEnd::step() {
    metrics.cycles++;
    redirected_this_cycle_ = false;
    depack_starved_ = false;
    fetch_note_.clear();

    if (penalty_bubbles_ > 0) {
        --penalty_bubbles_;
        fetch_note_ = "flush";
        log_cycle("-");
        return;
    }

    fetch.target_reg = write_bit_of(depack.rp);
    check_invariants();
    std::array<uint8_t, 2> occupancy = {depack.valid_count(0), depack.valid_count(1)};

    std::size_t delivered_before = delivered_.size();
    uint64_t pads_before = metrics.pad_skips;
    bool progress = depack_step();
    (void)progress;

    if (!done()) {
        if (redirected_this_cycle_) {
            if (fetch_note_.empty()) fetch_note_ = "redirect";
        } else {
            fetch_step(occupancy);
        }
    }

    if (log_) {
        std::string out = "-";
        if (delivered_.size() > delivered_before)
            out = format_asm(delivered_.back());
        else if (metrics.pad_skips > pads_before)
            out = "pad";
        log_cycle(out);
    }

    if (delivered_.size() > delivered_before || metrics.pad_skips > pads_before) {
        cycles_since_progress_ = 0;
    } else if (++cycles_since_progress_ >
               10000ull + 8ull * (config_.miss_latency + config_.mispredict_penalty)) {
        throw SimFault("front-end made no progress; fetch/depack deadlock");
    }
}

std::string FrontEnd::to_hex(uint32_t v) {
    std::ostringstream ss;
    ss << std::hex << v;
    return ss.str();
}

void FrontEnd::log_cycle(const std::string& delivered) {
    if (!log_) return;
    *log_ << metrics.cycles << " | " << (fetch_note_.empty() ? "-" : fetch_note_) << " | rp="
          << static_cast<int>(depack.rp) << " | pc=0x" << std::hex << depack.pc << std::dec
          << " | " << delivered << '\n';
}

SimResult FrontEnd::take_result() && {
    return {metrics, std::move(delivered_)};
}

SimResult simulate(const CompressedImage& image, const DynTrace& trace, const SimConfig& config,
                   std::ostream* log) {
    FrontEnd fe(image, trace, config, log);
    while (!fe.done()) fe.step();
    return std::move(fe).take_result();
}

SimResult simulate_baseline(const Program& program, const DynTrace& trace,
                            const SimConfig& config) {
    SimResult result;
    SimMetrics& m = result.metrics;
    CacheModel cache(config.icache_bytes, config.line_bytes);
    BranchUnit btb(config.btb_entries);

    for (const TraceEntry& entry : trace.entries) {
        if (entry.index >= program.code.size())
            throw SimFault("trace index outside the program");
        const Instruction& instr = program.code[entry.index];
        if (!(instr == entry.instr))
            throw SimFault("trace/program divergence at instruction " +
                           std::to_string(m.delivered_instructions));

        m.cycles++;
        uint32_t addr = entry.index * 4;
        if (cache.access(addr)) {
            m.icache_hits++;
        } else {
            m.icache_misses++;
            m.cycles += config.miss_latency;
            m.stall_cycles_miss += config.miss_latency;
        }
        m.chunk_fetches++;
        m.bytes_fetched += 4;
        m.btb_lookups++;

        result.delivered.push_back(instr);
        m.delivered_instructions++;

        if (is_branch_class(instr.op)) {
            if (entry.outcome == BranchOutcome::NotABranch)
                throw SimFault("trace entry for a branch lacks an outcome");
            bool taken = entry.outcome == BranchOutcome::Taken;
            uint32_t target = taken ? entry.target * 4 : 0;
            BranchUnit::Prediction pred = btb.lookup(addr, 0);
            bool correct = pred.taken == taken && (!taken || pred.target == target);
            if (!correct) {
                m.mispredict_flushes++;
                m.cycles += config.mispredict_penalty;
            }
            btb.update(addr, 0, taken, target);
        }
    }
    return result;
}

std::string metrics_csv_header() {
    return "model,cycles,chunk_fetches,icache_hits,icache_misses,btb_lookups,depack_cycles,"
           "pad_skips,delivered_instructions,stall_cycles_queue_full,stall_cycles_miss,"
           "mispredict_flushes,bytes_fetched";
}

std::string metrics_csv_row(const char* model, const SimMetrics& m) {
    std::ostringstream out;
    out << model << ',' << m.cycles << ',' << m.chunk_fetches << ',' << m.icache_hits << ','
        << m.icache_misses << ',' << m.btb_lookups << ',' << m.depack_cycles << ',' << m.pad_skips
        << ',' << m.delivered_instructions << ',' << m.stall_cycles_queue_full << ','
        << m.stall_cycles_miss << ',' << m.mispredict_flushes << ',' << m.bytes_fetched;
    return out.str();
}

} // namespace vli
