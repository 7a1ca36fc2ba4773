#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cadmus/isa.hpp"
#include "cadmus/vm.hpp"

namespace cadmus {

enum class TemplateKind { BasicMath, Equality, Ordering, Subroutines, Random };

inline constexpr std::size_t kTemplateKindCount = 5;

std::string_view template_name(TemplateKind kind);
std::optional<TemplateKind> parse_template(std::string_view name);

// Size bounds are per kind:
//   BasicMath, Equality, Ordering: operator count of each generated expression.
//   Subroutines: number of (operand, operator) steps in the subroutine body.
//   Random: token count of each drawn sequence.
struct TemplateSpec {
  TemplateKind kind = TemplateKind::BasicMath;
  std::int64_t value_bound = 20;
  int min_size = 1;
  int max_size = 2;
  std::uint64_t seed = 0;

  static TemplateSpec defaults(TemplateKind kind, std::uint64_t seed = 0);
  void validate() const;

  friend bool operator==(const TemplateSpec&, const TemplateSpec&) = default;
};

// A generated arithmetic expression in postfix form together with its value.
struct Expr {
  std::vector<TokenId> postfix;
  std::int64_t value = 0;
};

// Parses and evaluates a digits-and-operators postfix string, e.g. "941-*".
// Returns nullopt when the text does not leave exactly one integer.
std::optional<Expr> parse_expr(std::string_view postfix);

// LHS, then RHS adjusted by a trailing "c+" or "c-" so both sides agree,
// then '=' and '.'. Returns nullopt when |lhs - rhs| > 9.
std::optional<Program> close_equality(const Expr& lhs, const Expr& rhs);

// Returns a true-program; a pure function of (spec, index).
Program sample(const TemplateSpec& spec, std::uint64_t index);

// Appends '!' at the halting point so a single trailing zero becomes one.
// Throws NotRepairable when any output is NAN, the stack is empty, a zero
// sits below the top, or the step limit stopped the program.
Program negate_repair(const Program& program, const VmConfig& config = {});

struct AcceptanceCounter {
  std::uint64_t accepted = 0;
  std::uint64_t attempted = 0;
  double rate() const { return attempted ? static_cast<double>(accepted) / static_cast<double>(attempted) : 0.0; }
};

// Rejection sampling over uniform sequences of the 22 published
// instructions; returns the first sequence that is a true-program.
Program random_true_program(std::uint64_t seed, std::uint64_t index, std::size_t length,
                            AcceptanceCounter* counter = nullptr);

struct MixtureEntry {
  TemplateSpec spec;
  double weight = 1.0;
  std::optional<std::uint64_t> count;
};

struct MixtureSpec {
  std::vector<MixtureEntry> entries;
  std::uint64_t total_count = 0;
  std::uint64_t seed = 0;

  // Exact counts when every entry has one, otherwise largest-remainder
  // apportionment of total_count by weight.
  std::vector<std::uint64_t> realized_counts() const;
  std::uint64_t realized_total() const;
  void validate() const;
};

// Standard sample ratios (10M : 10M : 10M : 10M : 200k) divided by `divisor`.
MixtureSpec standard_mixture(std::uint64_t divisor, std::int64_t value_bound, std::uint64_t seed);

struct LabeledProgram {
  std::size_t entry = 0;
  TemplateKind kind = TemplateKind::BasicMath;
  Program program;
};

// Seeded shuffle of (entry, ordinal) pairs; fixes the emission order.
std::vector<std::pair<std::uint32_t, std::uint64_t>> mixture_layout(const MixtureSpec& mix);

// Streams the mixture in layout order. Generation is split across `threads`
// workers (0 = hardware concurrency); output is identical for any count.
void generate_mixture(const MixtureSpec& mix, const std::function<void(const LabeledProgram&)>& sink,
                      unsigned threads = 0);
std::vector<LabeledProgram> sample_mixture(const MixtureSpec& mix, unsigned threads = 0);

nlohmann::ordered_json to_json(const TemplateSpec& spec);
nlohmann::ordered_json to_json(const MixtureSpec& mix);
TemplateSpec template_spec_from_json(const nlohmann::ordered_json& j);
MixtureSpec mixture_spec_from_json(const nlohmann::ordered_json& j);

}  // namespace cadmus
