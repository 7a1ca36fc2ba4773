#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cadmus {

using TokenId = std::uint8_t;

inline constexpr std::size_t kVocabularySize = 65;

enum class SymbolForm { Standard, Alternate };

std::string_view form_name(SymbolForm form);
// Accepts "std"/"standard" and "alt"/"alternate".
std::optional<SymbolForm> parse_form(std::string_view name);

enum class OpKind : std::uint8_t {
  PushDigit,
  Add,
  Sub,
  Mul,
  FloorDiv,
  Mod,
  Max,
  Min,
  Lt,
  Gt,
  Eq,
  Not,
  End,
  DefBegin,
  DefEnd,
  Call,
  Reserved,
};

// Fixed token-id assignment. Ids 27..64 are reserved slots.
namespace tok {
inline constexpr TokenId kEnd = 0;
inline constexpr TokenId kDigit0 = 1;
inline constexpr TokenId kAdd = 11;
inline constexpr TokenId kSub = 12;
inline constexpr TokenId kMul = 13;
inline constexpr TokenId kFloorDiv = 14;
inline constexpr TokenId kMod = 15;
inline constexpr TokenId kMax = 16;
inline constexpr TokenId kMin = 17;
inline constexpr TokenId kLt = 18;
inline constexpr TokenId kGt = 19;
inline constexpr TokenId kEq = 20;
inline constexpr TokenId kNot = 21;
inline constexpr TokenId kDefBegin = 22;
inline constexpr TokenId kDefEnd = 23;
inline constexpr TokenId kCall0 = 24;
inline constexpr TokenId kFirstReserved = 27;

constexpr TokenId digit(int d) { return static_cast<TokenId>(kDigit0 + d); }
constexpr TokenId call(int slot) { return static_cast<TokenId>(kCall0 + slot); }
}  // namespace tok

struct OpCode {
  OpKind kind = OpKind::Reserved;
  // Digit for PushDigit, slot for Call, token id for Reserved; 0 otherwise.
  std::uint8_t arg = 0;

  static OpCode from_token(TokenId id);
  TokenId token() const;

  friend bool operator==(const OpCode&, const OpCode&) = default;
};

struct InstructionInfo {
  int pops;
  int pushes;
  std::string_view description;
};

// Stack effect of a non-reserved opcode. Throws ReservedOpcode.
InstructionInfo instruction_info(OpCode op);

// A tokenized program. Equality compares tokens only; `form` records the
// glyph set the program was parsed from.
struct Program {
  std::vector<TokenId> tokens;
  SymbolForm form = SymbolForm::Standard;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  friend bool operator==(const Program& a, const Program& b) { return a.tokens == b.tokens; }
  friend auto operator<=>(const Program& a, const Program& b) { return a.tokens <=> b.tokens; }
};

std::optional<char> glyph(TokenId id, SymbolForm form);
std::optional<TokenId> token_for(char c, SymbolForm form);

// One token per character. In Standard form a '[' ... ']' wrapper around the
// whole string is stripped first. Throws UnknownSymbol.
Program encode(std::string_view text, SymbolForm form = SymbolForm::Standard);

// Throws UnprintableToken for ids without a glyph in `form`.
std::string decode(std::span<const TokenId> tokens, SymbolForm form = SymbolForm::Standard);
inline std::string decode(const Program& program, SymbolForm form = SymbolForm::Standard) {
  return decode(std::span<const TokenId>(program.tokens), form);
}

std::string transcode(std::string_view text, SymbolForm from, SymbolForm to);

// The 22 instructions of the published comparison-task subset, in id order.
std::span<const TokenId> published_tokens();

// Digits plus the seven binary arithmetic/extremum ops.
std::vector<TokenId> arithmetic_alphabet();

// JSON array dump of the vocabulary: id, std, alt, pop, push, description.
// Reserved slots are included with null glyphs.
std::string instruction_table_json(bool pretty = false);

}  // namespace cadmus
