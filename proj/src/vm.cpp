#include "cadmus/vm.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace cadmus {
namespace {

Value pop(Stack& stack) {
  if (stack.empty()) return Value::nan();
  const Value v = stack.back();
  stack.pop_back();
  return v;
}

std::optional<std::int64_t> floor_div(std::int64_t a, std::int64_t b) {
  if (b == 0) return std::nullopt;
  if (a == std::numeric_limits<std::int64_t>::min() && b == -1) return std::nullopt;
  std::int64_t q = a / b;
  if (a % b != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

// Result takes the sign of the divisor, so a == b * (a // b) + a % b.
std::optional<std::int64_t> floor_mod(std::int64_t a, std::int64_t b) {
  if (b == 0) return std::nullopt;
  if (b == -1) return 0;
  std::int64_t r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

std::optional<std::int64_t> binary(OpKind kind, std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  switch (kind) {
    case OpKind::Add:
      if (__builtin_add_overflow(a, b, &r)) return std::nullopt;
      return r;
    case OpKind::Sub:
      if (__builtin_sub_overflow(a, b, &r)) return std::nullopt;
      return r;
    case OpKind::Mul:
      if (__builtin_mul_overflow(a, b, &r)) return std::nullopt;
      return r;
    case OpKind::FloorDiv: return floor_div(a, b);
    case OpKind::Mod: return floor_mod(a, b);
    case OpKind::Max: return std::max(a, b);
    case OpKind::Min: return std::min(a, b);
    case OpKind::Lt: return a < b ? 1 : 0;
    case OpKind::Gt: return a > b ? 1 : 0;
    case OpKind::Eq: return a == b ? 1 : 0;
    default: return std::nullopt;
  }
}

class Engine {
 public:
  Engine(std::span<const TokenId> program, const VmConfig& config) : config_(config) {
    config_.validate();
    state_.program = program;
    defs_ = scan_definitions(program);
    state_.subroutines = defs_.bound;
  }

  template <typename OnConsumed>
  HaltReason drive(OnConsumed&& on_consumed) {
    const auto program = state_.program;
    std::size_t next_def = 0;
    while (state_.pc < program.size()) {
      while (next_def < defs_.spans.size() && defs_.spans[next_def].first < state_.pc) ++next_def;
      if (next_def < defs_.spans.size() && defs_.spans[next_def].first == state_.pc) {
        // Definition bodies are skipped in-line; each skipped token is consumed.
        const std::size_t close = defs_.spans[next_def].second;
        for (; state_.pc <= close; ++state_.pc) on_consumed(state_.pc, program[state_.pc], state_.stack);
        continue;
      }
      if (state_.steps >= config_.max_steps) return HaltReason::StepLimit;
      const std::size_t pos = state_.pc;
      const OpCode op = OpCode::from_token(program[pos]);
      step(state_, op, config_);
      ++state_.pc;
      on_consumed(pos, program[pos], state_.stack);
      if (state_.halted) return state_.step_limited ? HaltReason::StepLimit : HaltReason::End;
    }
    return HaltReason::ProgramEnd;
  }

  Stack take_stack() { return std::move(state_.stack); }

 private:
  VmConfig config_;
  MachineState state_;
  DefinitionTable defs_;
};

}  // namespace

std::string to_string(const Stack& stack) {
  std::string out = "[";
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (i) out += ", ";
    out += stack[i].to_string();
  }
  return out + "]";
}

void VmConfig::validate() const {
  if (max_call_depth < 1) throw std::invalid_argument("max_call_depth must be >= 1");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (output_arity && *output_arity < 1) throw std::invalid_argument("output_arity must be >= 1");
}

void apply_stack_effect(Stack& stack, OpCode op) {
  switch (op.kind) {
    case OpKind::PushDigit:
      stack.push_back(Value::of(op.arg));
      return;
    case OpKind::Not: {
      const Value a = pop(stack);
      stack.push_back(a.is_nan() ? Value::nan() : Value::of(a.get() == 0 ? 1 : 0));
      return;
    }
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::FloorDiv:
    case OpKind::Mod:
    case OpKind::Max:
    case OpKind::Min:
    case OpKind::Lt:
    case OpKind::Gt:
    case OpKind::Eq: {
      const Value b = pop(stack);
      const Value a = pop(stack);
      if (a.is_nan() || b.is_nan()) {
        stack.push_back(Value::nan());
        return;
      }
      const auto r = binary(op.kind, a.get(), b.get());
      stack.push_back(r ? Value::of(*r) : Value::nan());
      return;
    }
    case OpKind::Reserved:
      stack.push_back(Value::nan());
      return;
    case OpKind::End:
    case OpKind::DefBegin:
    case OpKind::DefEnd:
    case OpKind::Call:
      return;
  }
}

void step(MachineState& state, OpCode op, const VmConfig& config) {
  if (state.halted) return;
  ++state.steps;
  switch (op.kind) {
    case OpKind::End:
      state.halted = true;
      return;
    case OpKind::Call: {
      const auto& body = state.subroutines[op.arg];
      if (!body || state.call_depth >= config.max_call_depth) {
        state.stack.push_back(Value::nan());
        return;
      }
      ++state.call_depth;
      for (std::size_t i = body->begin; i < body->end && !state.halted; ++i) {
        if (state.steps >= config.max_steps) {
          state.halted = true;
          state.step_limited = true;
          break;
        }
        step(state, OpCode::from_token(state.program[i]), config);
      }
      --state.call_depth;
      return;
    }
    default:
      apply_stack_effect(state.stack, op);
      return;
  }
}

MachineState stepped(MachineState state, OpCode op, const VmConfig& config) {
  step(state, op, config);
  return state;
}

DefinitionTable scan_definitions(std::span<const TokenId> program) {
  DefinitionTable table;
  std::size_t bound = 0;
  for (std::size_t i = 0; i < program.size(); ++i) {
    if (program[i] != tok::kDefBegin) continue;
    const auto close = std::find(program.begin() + static_cast<std::ptrdiff_t>(i) + 1, program.end(), tok::kDefEnd);
    if (close == program.end()) break;  // unmatched '{' (and any later ones) are no-ops
    const auto j = static_cast<std::size_t>(close - program.begin());
    if (bound < table.bound.size()) table.bound[bound++] = SubroutineBody{i + 1, j};
    table.spans.emplace_back(i, j);
    i = j;
  }
  return table;
}

RunResult run(std::span<const TokenId> program, const VmConfig& config) {
  Engine engine(program, config);
  RunResult result;
  result.halt = engine.drive([&](std::size_t, TokenId, const Stack&) { ++result.consumed; });
  result.outputs = engine.take_stack();
  return result;
}

ExecutionResult execute(std::span<const TokenId> program, const VmConfig& config) {
  Engine engine(program, config);
  ExecutionResult result;
  result.halt = engine.drive([&](std::size_t pos, TokenId token, const Stack& stack) {
    result.trace.entries.push_back({pos, token, stack});
  });
  result.outputs = engine.take_stack();
  return result;
}

Classification classify_outputs(const Stack& outputs) {
  if (outputs.empty()) return Classification::FalseProgram;
  return std::all_of(outputs.begin(), outputs.end(), [](Value v) { return truthy(v); })
             ? Classification::TrueProgram
             : Classification::FalseProgram;
}

Verdict classify(std::span<const TokenId> program, const VmConfig& config) {
  RunResult r = run(program, config);
  Verdict verdict;
  verdict.classification = classify_outputs(r.outputs);
  verdict.outputs = std::move(r.outputs);
  return verdict;
}

Stack output_view(const Stack& outputs, std::size_t arity) {
  if (arity < 1) throw std::invalid_argument("output_view arity must be >= 1");
  Stack view(arity, Value::nan());
  const std::size_t n = std::min(arity, outputs.size());
  std::copy(outputs.end() - static_cast<std::ptrdiff_t>(n), outputs.end(), view.end() - static_cast<std::ptrdiff_t>(n));
  return view;
}

}  // namespace cadmus
