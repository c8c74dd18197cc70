#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "vli/codec.hpp"
#include "vli/interp.hpp"
#include "vli/isa.hpp"

namespace vli {

struct SimConfig {
    uint32_t icache_bytes = 16 * 1024;
    uint32_t line_bytes = 32;
    uint32_t miss_latency = 10;
    uint32_t btb_entries = 64;
    uint32_t mispredict_penalty = 3;
    // When set, full-length deliveries do not charge a depack cycle (the
    // stage passes them through untouched).
    bool depack_full_bypass = false;
};

struct SimMetrics {
    uint64_t chunk_fetches = 0;
    uint64_t icache_hits = 0;
    uint64_t icache_misses = 0;
    uint64_t btb_lookups = 0;
    uint64_t depack_cycles = 0;
    uint64_t pad_skips = 0;
    uint64_t delivered_instructions = 0;
    uint64_t stall_cycles_queue_full = 0;
    uint64_t stall_cycles_miss = 0;
    uint64_t mispredict_flushes = 0;
    uint64_t bytes_fetched = 0;
    uint64_t cycles = 0;
};

// Ring arithmetic of the depack queue; kept as free functions so the
// arithmetic itself can be tested exhaustively.
constexpr uint8_t ring_advance(uint8_t rp, uint8_t length) {
    return static_cast<uint8_t>((rp + length) & 7);
}
// On a redirect the read pointer takes the two low bits of the byte-aligned
// target address; the high bit is 0, selecting register A.
constexpr uint8_t redirect_rp(uint32_t byte_addr) {
    return static_cast<uint8_t>(byte_addr & 3);
}
constexpr uint8_t write_bit_of(uint8_t rp) {
    return static_cast<uint8_t>((rp >> 2) & 1);
}

// Fetch-side state. cc is the chunk-aligned byte address of the next chunk
// to fetch. target_reg mirrors the write bit fed back from depack (0 = A,
// 1 = B).
struct FetchState {
    uint32_t cc = 0;
    bool fetch_enable = true;
    uint32_t pending_miss = 0;
    uint8_t target_reg = 0;
    // In-flight miss bookkeeping: chunk address and destination register.
    uint32_t miss_addr = 0;
    uint8_t miss_reg = 0;
    bool miss_active = false;
    // Set after a predicted-taken chunk: fetch holds (apart from feeding the
    // sequential chunk a straddling branch still needs) until the branch
    // resolves.
    bool holding = false;
};

// The 8-byte ring buffer between fetch and depack. Bytes 0..3 are register
// A, bytes 4..7 register B; rp points at the next instruction's first byte.
struct DepackState {
    std::array<uint8_t, 8> q{};
    std::array<bool, 8> valid{};
    uint8_t rp = 0;
    uint32_t pc = 0; // byte-aligned address of the next instruction to depack
    std::optional<Instruction> out_reg;

    uint8_t valid_count(uint8_t reg) const {
        uint8_t n = 0;
        for (int k = 0; k < 4; ++k) n += valid[reg * 4 + k] ? 1 : 0;
        return n;
    }
    // Contiguous valid bytes starting at rp.
    uint8_t valid_from_rp() const {
        uint8_t n = 0;
        while (n < 8 && valid[ring_advance(rp, n)]) ++n;
        return n;
    }
};

struct BtbEntry {
    bool valid = false;
    uint32_t tag = 0;
    uint32_t target = 0;        // byte address
    uint8_t counter = 0;        // 2-bit saturating; >= 2 predicts taken
    uint8_t branch_offset = 0;  // byte offset of the branch within its chunk
};

// Direct-mapped branch target buffer, looked up once per chunk fetch (the
// baseline model looks it up once per instruction instead).
struct BranchUnit {
    explicit BranchUnit(uint32_t entries);
    struct Prediction {
        bool taken = false;
        uint32_t target = 0;
        uint8_t branch_offset = 0;
    };
    // entry_offset: first byte of the chunk that will actually be consumed;
    // a predicted branch sitting before it cannot be reached and is ignored.
    Prediction lookup(uint32_t chunk_addr, uint8_t entry_offset) const;
    void update(uint32_t chunk_addr, uint8_t branch_offset, bool taken, uint32_t target);

    std::vector<BtbEntry> entries;
    std::optional<uint32_t> pending_redirect; // predicted target while holding

  private:
    uint32_t index_of(uint32_t chunk_addr) const;
    uint32_t tag_of(uint32_t chunk_addr) const;
};

// Direct-mapped instruction cache, hit/miss only.
struct CacheModel {
    CacheModel(uint32_t total_bytes, uint32_t line_bytes);
    bool access(uint32_t addr); // true on hit; fills the line on miss

    uint32_t line_bytes;
    std::vector<std::optional<uint32_t>> line_tags;
};

struct SimResult {
    SimMetrics metrics;
    std::vector<Instruction> delivered;
};

// Cycle-level model of the modified front-end: chunk fetch into the A/B
// ring registers, depack extraction of 8/16/24/32-bit codes, chunk-granular
// branch prediction driven by the trace's actual outcomes.
class FrontEnd {
  public:
    FrontEnd(const CompressedImage& image, const DynTrace& trace, const SimConfig& config,
             std::ostream* log = nullptr);

    bool done() const { return delivered_.size() >= trace_->entries.size(); }
    void step(); // one cycle
    SimResult take_result() &&;

    // exposed for white-box unit tests
    FetchState fetch;
    DepackState depack;
    BranchUnit branches;
    CacheModel cache;
    SimMetrics metrics;

  private:
    struct PendingPrediction {
        uint32_t chunk_addr = 0;
        uint32_t target = 0;
        uint8_t branch_offset = 0;
    };

    void fetch_step(const std::array<uint8_t, 2>& occupancy_before);
    // Returns true if the depack stage made progress this cycle.
    bool depack_step();
    void resolve_branch(const Instruction& instr, uint32_t byte_addr, const TraceEntry& entry);
    void apply_redirect(uint32_t target_addr);
    void write_chunk(uint32_t chunk_addr, uint8_t reg);
    void check_invariants() const;
    void log_cycle(const std::string& delivered);
    static std::string to_hex(uint32_t v);

    const CompressedImage* image_;
    const DynTrace* trace_;
    SimConfig config_;
    std::ostream* log_;
    std::vector<Instruction> delivered_;
    std::optional<PendingPrediction> pending_pred_;
    uint32_t penalty_bubbles_ = 0;
    bool redirected_this_cycle_ = false;
    bool depack_starved_ = false;
    uint8_t entry_offset_next_ = 0;
    uint64_t cycles_since_progress_ = 0;
    std::string fetch_note_;
};

// Runs the compressed-path model until every trace entry is delivered.
// Throws SimFault if the delivered stream diverges from the trace.
SimResult simulate(const CompressedImage& image, const DynTrace& trace, const SimConfig& config,
                   std::ostream* log = nullptr);

// Fixed-length reference front-end: one 4-byte fetch and one BTB lookup per
// delivered instruction, no depack stage, same cache and predictor.
SimResult simulate_baseline(const Program& program, const DynTrace& trace,
                            const SimConfig& config);

// Stable CSV row ordering used by the tools.
std::string metrics_csv_header();
std::string metrics_csv_row(const char* model, const SimMetrics& m);

} // namespace vli
