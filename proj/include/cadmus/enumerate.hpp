#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cadmus/isa.hpp"

namespace cadmus {

inline constexpr std::size_t kMaxEnumerationLength = 7;

struct ValueProgram {
  std::vector<TokenId> tokens;
  std::int64_t value = 0;

  friend bool operator==(const ValueProgram&, const ValueProgram&) = default;
};

// Every program of a fixed length over an alphabet that leaves exactly one
// integer on the stack. Entries are sorted by token sequence, so programs
// sharing a prefix are contiguous.
class ValueProgramSet {
 public:
  ValueProgramSet() = default;
  ValueProgramSet(std::size_t length, std::vector<TokenId> alphabet, std::vector<ValueProgram> entries);

  std::size_t length() const { return length_; }
  const std::vector<TokenId>& alphabet() const { return alphabet_; }
  const std::vector<ValueProgram>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Indices into entries() of programs computing `value`; empty if none.
  std::span<const std::size_t> indices_for(std::int64_t value) const;
  std::vector<Program> programs_for_value(std::int64_t value) const;
  bool reachable(std::int64_t value) const { return !indices_for(value).empty(); }

  // value -> number of programs computing it, ascending by value.
  std::map<std::int64_t, std::size_t> histogram() const;

 private:
  std::size_t length_ = 0;
  std::vector<TokenId> alphabet_;
  std::vector<ValueProgram> entries_;
  std::map<std::int64_t, std::vector<std::size_t>> index_;
};

// Depth-first enumeration that prunes underflow, NAN, and stack depths that
// cannot return to one. Work is split by first token across `threads`
// workers (0 = hardware concurrency) and merged in token order.
// Throws AlphabetContainsEnd, or std::invalid_argument for length > 7 or
// subroutine tokens in the alphabet.
ValueProgramSet enum_value_programs(std::size_t length, std::span<const TokenId> alphabet, unsigned threads = 0);
ValueProgramSet enum_value_programs(std::size_t length = 5);

std::vector<Program> programs_for_value(const ValueProgramSet& set, std::int64_t value);

enum class BaselineMode {
  // Majority final value among completions of the observed prefix.
  PrefixConditional,
  // Majority final value overall, ignoring which tokens were observed.
  LengthOnly,
};

// Accuracy of guessing the majority value after seeing t tokens. Ties break
// toward the smaller value. Precondition: t <= set.length().
double majority_baseline(const ValueProgramSet& set, std::size_t t, BaselineMode mode = BaselineMode::PrefixConditional);
std::vector<double> majority_baseline_curve(const ValueProgramSet& set,
                                            BaselineMode mode = BaselineMode::PrefixConditional);

struct ValueRange {
  std::int64_t lo = -20;
  std::int64_t hi = 20;
  std::size_t count() const { return hi < lo ? 0 : static_cast<std::size_t>(hi - lo + 1); }
  bool contains(std::int64_t v) const { return v >= lo && v <= hi; }
  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

struct GridSpec {
  ValueRange x_range;
  ValueRange y_range;
  std::size_t k = 10;
  std::vector<TokenId> comparison_set{tok::kLt, tok::kGt, tok::kEq};
  std::uint64_t seed = 0;
  // Square reported separately as the in-distribution accuracy.
  ValueRange in_dist{-20, 20};

  void validate() const;
};

struct GridItem {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::size_t slot = 0;
  std::vector<TokenId> prefix;  // program for x, then program for y
  TokenId truth = tok::kEq;

  friend bool operator==(const GridItem&, const GridItem&) = default;
};

TokenId comparison_truth(std::int64_t x, std::int64_t y);

// Items ordered by (x, y, slot). Cells whose true comparison is not in the
// grid's comparison set are omitted. Throws UnreachableValue.
std::vector<GridItem> build_grid(const GridSpec& spec, const ValueProgramSet& set);

// JSON-lines grid dataset: {x, y, slot, prefix_tokens, truth_token}.
void write_grid(const std::filesystem::path& path, std::span<const GridItem> items);
std::vector<GridItem> read_grid(const std::filesystem::path& path);

// Value-program cache: `<path>` holds "glyphs<TAB>value" lines and
// `<path>.manifest.json` records alphabet, length, count, and SHA-256.
void write_value_set(const std::filesystem::path& path, const ValueProgramSet& set);
ValueProgramSet read_value_set(const std::filesystem::path& path);

}  // namespace cadmus
