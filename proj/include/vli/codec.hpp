#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vli/isa.hpp"
#include "vli/profile.hpp"

namespace vli {

// Code classes of the variable-length stream. Total lengths are 8, 16, 24 or
// 32 bits; the first byte alone determines class and length.
enum class CodeClass : uint8_t {
    Full,   // 4B, bit 7 set, carries a relocated full word
    SLw,    // 1B  010 rr mmm
    SAddiu, // 1B  011 rrr mm
    SSw,    // 1B  0001 rr mm
    SSll,   // 1B  0010 rr mm
    SAddu,  // 1B  0011 rrrr
    SBeq,   // 2B  000010 rr + disp8
    SBne,   // 2B  000011 rr + disp8
    Mid24,  // 3B  000001 ff + rs(5) rt(5) imm(6), no lookup tables
    Pad,    // 1B  00000000, skipped by the decoder
    Illegal,
};

uint8_t class_length(CodeClass cls);
std::optional<Mnemonic> class_mnemonic(CodeClass cls); // short classes only
std::string_view class_name(CodeClass cls);

struct PrefixEntry {
    uint8_t pattern = 0; // left-aligned in the byte
    uint8_t width = 0;   // significant leading bits
    CodeClass cls = CodeClass::Illegal;
};

// The shipped first-byte table. Covers all 256 values: 1xxxxxxx full words,
// 0x00 pad, 0x01..0x03 illegal, everything else a short/mid class.
std::vector<PrefixEntry> default_prefix_table();

struct EncodingScheme {
    std::vector<PrefixEntry> prefix;
    SchemeLayout layout;
    LutSet luts;

    // Derived dense classifier, built by finalize().
    std::array<CodeClass, 256> byte_class{};

    // Validates prefix-freeness and exhaustiveness, checks the layout, and
    // builds byte_class. Throws ConfigError on a malformed table.
    void finalize();

    static EncodingScheme with_default_prefix(SchemeLayout layout, LutSet luts);
    bool operator==(const EncodingScheme& o) const {
        return prefix.size() == o.prefix.size() && layout == o.layout && luts == o.luts &&
               byte_class == o.byte_class;
    }
};

struct FirstByteInfo {
    CodeClass cls;
    uint8_t length; // bytes
};

// Classifies a first byte. Throws DecodeError naming the byte for the
// declared-illegal values.
FirstByteInfo first_byte_length(uint8_t b, const EncodingScheme& scheme);

// Chunked variable-length byte stream plus the address map needed to relate
// compressed byte addresses back to instruction indices.
struct CompressedImage {
    std::vector<uint8_t> bytes; // zero-padded to whole 4-byte chunks
    uint32_t entry = 0;
    std::vector<uint32_t> addr_map; // instruction index -> byte address
    EncodingScheme scheme;

    uint32_t chunk_count() const { return static_cast<uint32_t>(bytes.size() / 4); }
    std::optional<uint32_t> index_of_addr(uint32_t addr) const;
    void rebuild_reverse_map();

  private:
    std::unordered_map<uint32_t, uint32_t> addr_to_index_;
};

// Emits each instruction in its shortest legal class, inserts pad bytes so at
// most one branch-class instruction starts per aligned 4-byte chunk, and
// iterates branch relaxation to a fixed point (a widened branch never
// narrows). Branch displacements are signed byte offsets relative to the
// address immediately after the branch.
CompressedImage compress(const Program& program, const EncodingScheme& scheme);

// Software reference decoder: walks the stream with first_byte_length,
// expands through the LUTs, skips pad, and returns the semantic program.
Program decompress(const CompressedImage& image);

struct DecodedAt {
    Instruction instr;
    uint8_t length = 0;
    CodeClass cls = CodeClass::Illegal;
};

// Decodes the single code starting at `addr`. Shared by decompress and the
// cycle simulator's depack stage.
DecodedAt decode_at(const CompressedImage& image, uint32_t addr);
// Same, but over caller-supplied code bytes (e.g. the depack ring).
DecodedAt decode_code(std::span<const uint8_t> code, uint32_t addr, const CompressedImage& image);

struct ScanReport {
    std::map<CodeClass, uint64_t> count_per_class;
    std::map<CodeClass, uint64_t> bytes_per_class;
    uint64_t instruction_count = 0; // non-pad codes
    uint32_t chunk_count = 0;
    std::vector<uint32_t> violations; // chunk indices with >1 branch start
    double size_ratio = 0.0;          // bytes / (4 * instruction_count)
};

// Static walk over the emitted bytes; independent of compress() internals.
ScanReport static_scan(const CompressedImage& image);
std::string format_scan(const ScanReport& report);

// --- image files ------------------------------------------------------------
// Binary format (little-endian):
//   "VLI1"  magic
//   u8      version (1)
//   u32     entry
//   scheme: u8 table count, then per short mnemonic
//           u8 id, u8 reg_bits, u8 imm_bits, u8 has_imm_table,
//           u16 reg entry count + u16 packed combos,
//           u16 imm entry count + u16 raw immediates
//   u32     addr_map length + u32 addresses
//   u32     chunk count + 4*count stream bytes

void save_image(const CompressedImage& image, std::ostream& out);
CompressedImage load_image(std::istream& in);
void save_image_file(const CompressedImage& image, const std::string& path);
CompressedImage load_image_file(const std::string& path);

} // namespace vli
