#include "cadmus/isa.hpp"

#include "json.hpp"

#include "cadmus/error.hpp"

namespace cadmus {
namespace {

struct Entry {
  TokenId id;
  OpKind kind;
  std::uint8_t arg;
  char std_glyph;
  char alt_glyph;  // '\0' when the instruction has no alternate glyph
  int pops;
  int pushes;
  std::string_view description;
};

// Ids 0..26. The alternate column is the published remapping used to
// decouple glyphs from their conventional meaning.
constexpr std::array<Entry, 27> kTable{{
    {0, OpKind::End, 0, '.', '.', 0, 0, "end program"},
    {1, OpKind::PushDigit, 0, '0', '-', 0, 1, "push 0"},
    {2, OpKind::PushDigit, 1, '1', '[', 0, 1, "push 1"},
    {3, OpKind::PushDigit, 2, '2', '_', 0, 1, "push 2"},
    {4, OpKind::PushDigit, 3, '3', '+', 0, 1, "push 3"},
    {5, OpKind::PushDigit, 4, '4', '!', 0, 1, "push 4"},
    {6, OpKind::PushDigit, 5, '5', '#', 0, 1, "push 5"},
    {7, OpKind::PushDigit, 6, '6', '9', 0, 1, "push 6"},
    {8, OpKind::PushDigit, 7, '7', '1', 0, 1, "push 7"},
    {9, OpKind::PushDigit, 8, '8', '7', 0, 1, "push 8"},
    {10, OpKind::PushDigit, 9, '9', '^', 0, 1, "push 9"},
    {11, OpKind::Add, 0, '+', '*', 2, 1, "a+b"},
    {12, OpKind::Sub, 0, '-', '/', 2, 1, "a-b"},
    {13, OpKind::Mul, 0, '*', '%', 2, 1, "a*b"},
    {14, OpKind::FloorDiv, 0, '/', ')', 2, 1, "a//b"},
    {15, OpKind::Mod, 0, '%', '}', 2, 1, "a%b"},
    {16, OpKind::Max, 0, 'x', 'L', 2, 1, "max(a,b)"},
    {17, OpKind::Min, 0, 'n', 'b', 2, 1, "min(a,b)"},
    {18, OpKind::Lt, 0, '<', '?', 2, 1, "1 if a<b else 0"},
    {19, OpKind::Gt, 0, '>', '$', 2, 1, "1 if a>b else 0"},
    {20, OpKind::Eq, 0, '=', '~', 2, 1, "1 if a==b else 0"},
    {21, OpKind::Not, 0, '!', '&', 1, 1, "0 if a else 1"},
    {22, OpKind::DefBegin, 0, '{', '\0', 0, 0, "begin subroutine definition"},
    {23, OpKind::DefEnd, 0, '}', '\0', 0, 0, "end subroutine definition"},
    {24, OpKind::Call, 0, 'a', '\0', 0, 0, "call subroutine 0"},
    {25, OpKind::Call, 1, 'b', '\0', 0, 0, "call subroutine 1"},
    {26, OpKind::Call, 2, 'c', '\0', 0, 0, "call subroutine 2"},
}};

constexpr std::array<TokenId, 22> kPublished{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10,
                                             11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21};

struct GlyphMaps {
  std::array<std::int16_t, 256> std_to_id;
  std::array<std::int16_t, 256> alt_to_id;

  GlyphMaps() {
    std_to_id.fill(-1);
    alt_to_id.fill(-1);
    for (const Entry& e : kTable) {
      std_to_id[static_cast<unsigned char>(e.std_glyph)] = e.id;
      if (e.alt_glyph != '\0') alt_to_id[static_cast<unsigned char>(e.alt_glyph)] = e.id;
    }
  }
};

const GlyphMaps& maps() {
  static const GlyphMaps m;
  return m;
}

}  // namespace

std::string_view form_name(SymbolForm form) {
  return form == SymbolForm::Standard ? "std" : "alt";
}

std::optional<SymbolForm> parse_form(std::string_view name) {
  if (name == "std" || name == "standard") return SymbolForm::Standard;
  if (name == "alt" || name == "alternate") return SymbolForm::Alternate;
  return std::nullopt;
}

OpCode OpCode::from_token(TokenId id) {
  if (id < kTable.size()) return {kTable[id].kind, kTable[id].arg};
  return {OpKind::Reserved, id};
}

TokenId OpCode::token() const {
  switch (kind) {
    case OpKind::PushDigit: return tok::digit(arg);
    case OpKind::Add: return tok::kAdd;
    case OpKind::Sub: return tok::kSub;
    case OpKind::Mul: return tok::kMul;
    case OpKind::FloorDiv: return tok::kFloorDiv;
    case OpKind::Mod: return tok::kMod;
    case OpKind::Max: return tok::kMax;
    case OpKind::Min: return tok::kMin;
    case OpKind::Lt: return tok::kLt;
    case OpKind::Gt: return tok::kGt;
    case OpKind::Eq: return tok::kEq;
    case OpKind::Not: return tok::kNot;
    case OpKind::End: return tok::kEnd;
    case OpKind::DefBegin: return tok::kDefBegin;
    case OpKind::DefEnd: return tok::kDefEnd;
    case OpKind::Call: return tok::call(arg);
    case OpKind::Reserved: return arg;
  }
  return arg;
}

InstructionInfo instruction_info(OpCode op) {
  const TokenId id = op.token();
  if (op.kind == OpKind::Reserved || id >= kTable.size()) throw ReservedOpcode(id);
  const Entry& e = kTable[id];
  return {e.pops, e.pushes, e.description};
}

std::optional<char> glyph(TokenId id, SymbolForm form) {
  if (id >= kTable.size()) return std::nullopt;
  const char c = form == SymbolForm::Standard ? kTable[id].std_glyph : kTable[id].alt_glyph;
  if (c == '\0') return std::nullopt;
  return c;
}

std::optional<TokenId> token_for(char c, SymbolForm form) {
  const auto& table = form == SymbolForm::Standard ? maps().std_to_id : maps().alt_to_id;
  const std::int16_t id = table[static_cast<unsigned char>(c)];
  if (id < 0) return std::nullopt;
  return static_cast<TokenId>(id);
}

Program encode(std::string_view text, SymbolForm form) {
  std::size_t offset = 0;
  // '[' is the alternate glyph for 1, so only Standard text is unwrapped.
  if (form == SymbolForm::Standard && text.size() >= 2 && text.front() == '[' && text.back() == ']') {
    text = text.substr(1, text.size() - 2);
    offset = 1;
  }
  Program program;
  program.form = form;
  program.tokens.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto id = token_for(text[i], form);
    if (!id) throw UnknownSymbol(i + offset, text[i]);
    program.tokens.push_back(*id);
  }
  return program;
}

std::string decode(std::span<const TokenId> tokens, SymbolForm form) {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId id : tokens) {
    const auto c = glyph(id, form);
    if (!c) throw UnprintableToken(id);
    out.push_back(*c);
  }
  return out;
}

std::string transcode(std::string_view text, SymbolForm from, SymbolForm to) {
  return decode(encode(text, from), to);
}

std::span<const TokenId> published_tokens() { return kPublished; }

std::vector<TokenId> arithmetic_alphabet() {
  std::vector<TokenId> alphabet;
  for (int d = 0; d <= 9; ++d) alphabet.push_back(tok::digit(d));
  for (TokenId t = tok::kAdd; t <= tok::kMin; ++t) alphabet.push_back(t);
  return alphabet;
}

std::string instruction_table_json(bool pretty) {
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (std::size_t id = 0; id < kVocabularySize; ++id) {
    nlohmann::ordered_json row;
    row["id"] = id;
    if (id < kTable.size()) {
      const Entry& e = kTable[id];
      row["std"] = std::string(1, e.std_glyph);
      row["alt"] = e.alt_glyph == '\0' ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(std::string(1, e.alt_glyph));
      row["pop"] = e.pops;
      row["push"] = e.pushes;
      row["description"] = e.description;
    } else {
      row["std"] = nullptr;
      row["alt"] = nullptr;
      row["pop"] = 0;
      row["push"] = 1;
      row["description"] = "reserved (pushes NAN)";
    }
    table.push_back(std::move(row));
  }
  return pretty ? table.dump(2) : table.dump();
}

}  // namespace cadmus
