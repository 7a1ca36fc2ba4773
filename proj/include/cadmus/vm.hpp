#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cadmus/isa.hpp"

namespace cadmus {

// A stack cell: a signed 64-bit integer or the absorbing NAN.
class Value {
 public:
  constexpr Value() = default;  // NAN
  static constexpr Value nan() { return Value(); }
  static constexpr Value of(std::int64_t v) { return Value(v); }

  constexpr bool is_nan() const { return !value_.has_value(); }
  constexpr bool is_int() const { return value_.has_value(); }
  // Precondition: is_int().
  constexpr std::int64_t get() const { return *value_; }

  std::string to_string() const { return is_nan() ? "NAN" : std::to_string(*value_); }

  friend constexpr bool operator==(const Value&, const Value&) = default;

 private:
  constexpr explicit Value(std::int64_t v) : value_(v) {}
  std::optional<std::int64_t> value_;
};

// Zero and NAN are the only false values.
constexpr bool truthy(Value v) { return v.is_int() && v.get() != 0; }

using Stack = std::vector<Value>;

std::string to_string(const Stack& stack);

struct VmConfig {
  std::size_t max_call_depth = 16;
  std::size_t max_steps = 4096;
  // Arity for fixed-size output views; never affects classification.
  std::optional<std::size_t> output_arity;

  // Throws std::invalid_argument when a limit is zero.
  void validate() const;
};

struct SubroutineBody {
  std::size_t begin = 0;  // first body token
  std::size_t end = 0;    // one past the last body token (the '}' position)
};

struct MachineState {
  Stack stack;
  std::size_t pc = 0;
  std::span<const TokenId> program;
  std::array<std::optional<SubroutineBody>, 3> subroutines;
  std::size_t call_depth = 0;
  std::size_t steps = 0;
  bool halted = false;
  bool step_limited = false;
};

// Applies a stack-only instruction: pushes, arithmetic, comparisons and '!'.
// Control-flow opcodes (End, DefBegin, DefEnd, Call) leave the stack alone;
// Reserved pushes NAN. Empty-stack pops read NAN; division by zero and
// overflow yield NAN; any NAN operand makes the result NAN.
void apply_stack_effect(Stack& stack, OpCode op);

// One instruction against a full machine state, including Call (which runs
// the bound body against `state.program`) and End (which sets `halted`).
void step(MachineState& state, OpCode op, const VmConfig& config);
MachineState stepped(MachineState state, OpCode op, const VmConfig& config = {});

enum class HaltReason { End, ProgramEnd, StepLimit };

struct TraceEntry {
  std::size_t pos;
  TokenId token;
  Stack stack;  // after the token executed
};

struct ExecutionTrace {
  std::vector<TraceEntry> entries;
  std::size_t consumed() const { return entries.size(); }
};

struct RunResult {
  Stack outputs;  // bottom to top
  HaltReason halt = HaltReason::ProgramEnd;
  std::size_t consumed = 0;  // top-level tokens consumed
};

struct ExecutionResult {
  Stack outputs;
  ExecutionTrace trace;
  HaltReason halt = HaltReason::ProgramEnd;
};

// Scans the whole program and binds the first three '{...}' bodies to
// Call slots 0..2. Definitions do not nest: a body ends at the first '}'.
struct DefinitionTable {
  std::array<std::optional<SubroutineBody>, 3> bound;
  // Opening-brace position -> closing-brace position for every definition.
  std::vector<std::pair<std::size_t, std::size_t>> spans;
};
DefinitionTable scan_definitions(std::span<const TokenId> program);

// Never fails. Halts at the first top-level '.', at max_steps, or at the
// end of the tokens.
RunResult run(std::span<const TokenId> program, const VmConfig& config = {});
ExecutionResult execute(std::span<const TokenId> program, const VmConfig& config = {});
inline RunResult run(const Program& p, const VmConfig& config = {}) { return run(std::span<const TokenId>(p.tokens), config); }
inline ExecutionResult execute(const Program& p, const VmConfig& config = {}) {
  return execute(std::span<const TokenId>(p.tokens), config);
}

enum class Classification { TrueProgram, FalseProgram };

struct Verdict {
  Classification classification = Classification::FalseProgram;
  Stack outputs;

  bool is_true() const { return classification == Classification::TrueProgram; }
};

// True iff the final stack is non-empty and every value is truthy.
Classification classify_outputs(const Stack& outputs);
Verdict classify(std::span<const TokenId> program, const VmConfig& config = {});
inline Verdict classify(const Program& p, const VmConfig& config = {}) {
  return classify(std::span<const TokenId>(p.tokens), config);
}

// Top `arity` values, padded underneath with NAN. Precondition: arity >= 1.
Stack output_view(const Stack& outputs, std::size_t arity);

}  // namespace cadmus
