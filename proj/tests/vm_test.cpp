#include <limits>
#include <string>

#include "doctest.h"

#include "cadmus/error.hpp"
#include "cadmus/isa.hpp"
#include "cadmus/rng.hpp"
#include "cadmus/templates.hpp"
#include "cadmus/vm.hpp"
#include "oracles.hpp"

using namespace cadmus;

namespace {

const Value N = Value::nan();
Value I(std::int64_t v) { return Value::of(v); }

Stack outputs(std::string_view text, const VmConfig& config = {}) { return run(encode(text), config).outputs; }

Stack after(Stack stack, TokenId op) {
  apply_stack_effect(stack, OpCode::from_token(op));
  return stack;
}

Stack from_oracle(const std::vector<oracle::Cell>& cells) {
  Stack s;
  for (const auto& c : cells) s.push_back(c ? Value::of(*c) : Value::nan());
  return s;
}

std::vector<TokenId> random_tokens(Rng& rng, std::size_t max_len, std::size_t vocab) {
  std::vector<TokenId> t(rng.below(max_len + 1));
  for (auto& x : t) x = static_cast<TokenId>(rng.below(vocab));
  return t;
}

// Published instructions only: no subroutine or reserved ids.
std::vector<TokenId> random_published(Rng& rng, std::size_t max_len) {
  const auto pub = published_tokens();
  std::vector<TokenId> t(rng.below(max_len + 1));
  for (auto& x : t) x = pub[rng.below(pub.size())];
  return t;
}

}  // namespace

TEST_SUITE("vm") {
  TEST_CASE("truthy") {
    CHECK_FALSE(truthy(I(0)));
    CHECK_FALSE(truthy(N));
    CHECK(truthy(I(7)));
    CHECK(truthy(I(-1)));
  }

  TEST_CASE("execute examples") {
    CHECK(outputs("34+7=.") == Stack{I(1)});
    CHECK(outputs(".").empty());
    CHECK(outputs("03-2/") == Stack{I(-2)});
    CHECK(outputs("").empty());
  }

  TEST_CASE("step examples") {
    CHECK(after({I(3), I(4)}, tok::kMax) == Stack{I(4)});
    CHECK(after({}, tok::kAdd) == Stack{N});
    CHECK(after({I(9), I(0)}, tok::kFloorDiv) == Stack{N});
  }

  TEST_CASE("binary operand order is a then b") {
    CHECK(outputs("73-") == Stack{I(4)});
    CHECK(outputs("72/") == Stack{I(3)});
    CHECK(outputs("72%") == Stack{I(1)});
    CHECK(outputs("37<") == Stack{I(1)});
    CHECK(outputs("37>") == Stack{I(0)});
    CHECK(outputs("37n") == Stack{I(3)});
    CHECK(outputs("37x") == Stack{I(7)});
    CHECK(outputs("33=") == Stack{I(1)});
    CHECK(outputs("0!") == Stack{I(1)});
    CHECK(outputs("5!") == Stack{I(0)});
  }

  TEST_CASE("floor division and modulo follow the divisor's sign") {
    // -7 // 2 = -4, -7 % 2 = 1, 7 // -2 = -4, 7 % -2 = -1.
    CHECK(outputs("07-2/") == Stack{I(-4)});
    CHECK(outputs("07-2%") == Stack{I(1)});
    CHECK(outputs("702-/") == Stack{I(-4)});
    CHECK(outputs("702-%") == Stack{I(-1)});
    CHECK(outputs("07-02-/") == Stack{I(3)});
    CHECK(outputs("07-02-%") == Stack{I(-1)});
    CHECK(outputs("90%") == Stack{N});
  }

  TEST_CASE("overflow yields NAN") {
    Stack s{I(std::numeric_limits<std::int64_t>::max()), I(1)};
    CHECK(after(s, tok::kAdd) == Stack{N});
    CHECK(after({I(std::numeric_limits<std::int64_t>::min()), I(1)}, tok::kSub) == Stack{N});
    CHECK(after({I(std::numeric_limits<std::int64_t>::min()), I(-1)}, tok::kFloorDiv) == Stack{N});
    CHECK(after({I(std::numeric_limits<std::int64_t>::min()), I(-1)}, tok::kMod) == Stack{I(0)});
    CHECK(after({I(std::int64_t{1} << 62), I(4)}, tok::kMul) == Stack{N});
    // 9^20 overflows 64 bits.
    std::string p = "9";
    for (int i = 0; i < 20; ++i) p += "9*";
    CHECK(outputs(p) == Stack{N});
  }

  TEST_CASE("NAN is absorbing") {
    for (TokenId op = tok::kAdd; op <= tok::kEq; ++op) {
      CHECK(after({N, I(3)}, op) == Stack{N});
      CHECK(after({I(3), N}, op) == Stack{N});
      CHECK(after({I(5)}, op) == Stack{N});
    }
    CHECK(after({N}, tok::kNot) == Stack{N});
    CHECK(after({}, tok::kNot) == Stack{N});
    CHECK(outputs("90/!.") == Stack{N});
    CHECK(outputs("90/5+3*1=.") == Stack{N});
  }

  TEST_CASE("reserved ids push NAN and pop nothing") {
    for (std::size_t id = tok::kFirstReserved; id < kVocabularySize; ++id) {
      CHECK(after({I(4)}, static_cast<TokenId>(id)) == Stack{I(4), N});
    }
  }

  TEST_CASE("tokens after the first end are not consumed") {
    const auto r = run(encode("3.4+"));
    CHECK(r.outputs == Stack{I(3)});
    CHECK(r.consumed == 2);
    CHECK(r.halt == HaltReason::End);
    const auto e = execute(encode("12+"));
    CHECK(e.halt == HaltReason::ProgramEnd);
    CHECK(e.trace.consumed() == 3);
    CHECK(e.trace.entries[1].stack == Stack{I(1), I(2)});
  }

  TEST_CASE("classify examples") {
    auto v = classify(encode("34+8=."));
    CHECK_FALSE(v.is_true());
    CHECK(v.outputs == Stack{I(0)});
    v = classify(encode("34+8=!."));
    CHECK(v.is_true());
    CHECK(v.outputs == Stack{I(1)});
    v = classify(encode("941-*55*2+=."));
    CHECK(v.is_true());
    CHECK(v.outputs == Stack{I(1)});
    CHECK(classify(encode("12+0>.")).is_true());
    CHECK(classify(encode("12+0>")).is_true());
    CHECK_FALSE(classify(encode(".")).is_true());
    CHECK(classify(encode("35.")).is_true());
    CHECK_FALSE(classify(encode("30.")).is_true());
    CHECK_FALSE(classify(encode("90/.")).is_true());
  }

  TEST_CASE("output_view examples") {
    CHECK(output_view({I(1)}, 3) == Stack{N, N, I(1)});
    CHECK(output_view({I(27), I(25), I(1)}, 2) == Stack{I(25), I(1)});
    CHECK(output_view({}, 1) == Stack{N});
    CHECK_THROWS_AS(output_view({}, 0), std::invalid_argument);
    VmConfig c;
    c.output_arity = 1;
    CHECK_FALSE(classify(encode("03."), c).is_true());
  }

  TEST_CASE("config validation") {
    VmConfig c;
    c.max_steps = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.max_steps = 1;
    c.max_call_depth = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }

  TEST_CASE("subroutines") {
    // Definition first, then call.
    CHECK(outputs("{2*}3a.") == Stack{I(6)});
    // Call before the definition.
    CHECK(outputs("3a{2*}.") == Stack{I(6)});
    CHECK(outputs("3{2*}a4+a.") == Stack{I(20)});
    // Slots bind in order of appearance.
    CHECK(outputs("{1+}{2*}{3-}5abc.") == Stack{I(9)});
    // Unbound slot pushes NAN.
    CHECK(outputs("5b.") == Stack{I(5), N});
    // Fourth body is never bound.
    CHECK(outputs("{}{}{}{7}a.") == Stack{});
    // A body ends at the first '}'.
    CHECK(outputs("{1{2}3}a.") == Stack{I(3), I(1), I(2)});
    // Stray braces are no-ops.
    CHECK(outputs("4}5.") == Stack{I(4), I(5)});
    CHECK(outputs("4{5.") == Stack{I(4), I(5)});
    // '.' inside a body halts the whole program.
    const auto r = run(encode("{1.}a2."));
    CHECK(r.outputs == Stack{I(1)});
    CHECK(r.halt == HaltReason::End);
  }

  TEST_CASE("subroutine trace records skipped definition tokens") {
    const auto e = execute(encode("{2*}3a."));
    REQUIRE(e.trace.consumed() == 7);
    CHECK(e.trace.entries[3].token == tok::kDefEnd);
    CHECK(e.trace.entries[3].stack.empty());
    CHECK(e.trace.entries[5].stack == Stack{I(6)});
  }

  TEST_CASE("recursion is cut off at the depth limit") {
    // a calls itself: each level pushes 1 and the deepest call pushes NAN.
    VmConfig c;
    c.max_call_depth = 4;
    const Stack s = outputs("{1a}a.", c);
    CHECK(s == Stack{I(1), I(1), I(1), I(1), N});
    CHECK(outputs("{1a}a.").size() == 17);
  }

  TEST_CASE("step limit halts with the current stack") {
    VmConfig c;
    c.max_steps = 3;
    const auto r = run(encode("12345"), c);
    CHECK(r.outputs == Stack{I(1), I(2), I(3)});
    CHECK(r.halt == HaltReason::StepLimit);
    // Mutual recursion explodes without the step limit.
    const auto big = run(encode("{aa}{bb}a."));
    CHECK(big.halt == HaltReason::StepLimit);
  }

  TEST_CASE("step on a machine state") {
    MachineState s;
    const auto p = encode("12+");
    s.program = p.tokens;
    step(s, OpCode::from_token(tok::digit(4)), {});
    step(s, OpCode::from_token(tok::digit(5)), {});
    const MachineState t = stepped(s, OpCode::from_token(tok::kMul));
    CHECK(t.stack == Stack{I(20)});
    CHECK(s.stack == Stack{I(4), I(5)});
    const MachineState h = stepped(t, OpCode::from_token(tok::kEnd));
    CHECK(h.halted);
  }

  TEST_CASE("property: no-fault totality over the whole vocabulary") {
    Rng rng(2024);
    for (int trial = 0; trial < 20000; ++trial) {
      const auto tokens = random_tokens(rng, 64, kVocabularySize);
      const auto e = execute(std::span<const TokenId>(tokens));
      CHECK(e.trace.consumed() <= tokens.size());
      const auto r = run(std::span<const TokenId>(tokens));
      CHECK(r.consumed <= tokens.size());
      CHECK(r.outputs == e.outputs);
    }
  }

  TEST_CASE("property: agrees with the reference interpreter") {
    Rng rng(99);
    for (int trial = 0; trial < 20000; ++trial) {
      const auto tokens = random_published(rng, 30);
      const auto want = oracle::interpret(tokens);
      const auto r = run(std::span<const TokenId>(tokens));
      CHECK(r.outputs == from_oracle(want.stack));
      CHECK(r.consumed == want.consumed);
      CHECK(classify(std::span<const TokenId>(tokens)).is_true() == oracle::is_true(want.stack));
    }
  }

  TEST_CASE("property: determinism") {
    Rng rng(5);
    for (int trial = 0; trial < 2000; ++trial) {
      const auto tokens = random_tokens(rng, 64, kVocabularySize);
      const auto a = execute(std::span<const TokenId>(tokens));
      const auto b = execute(std::span<const TokenId>(tokens));
      CHECK(a.outputs == b.outputs);
      CHECK(a.halt == b.halt);
      REQUIRE(a.trace.consumed() == b.trace.consumed());
      for (std::size_t i = 0; i < a.trace.consumed(); ++i) {
        CHECK(a.trace.entries[i].stack == b.trace.entries[i].stack);
        CHECK(a.trace.entries[i].token == b.trace.entries[i].token);
      }
    }
  }

  TEST_CASE("property: prefix consistency") {
    Rng rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
      const auto tokens = random_published(rng, 24);
      const auto e = execute(std::span<const TokenId>(tokens));
      for (std::size_t t = 0; t < e.trace.consumed(); ++t) {
        CHECK(e.trace.entries[t].pos == t);
        CHECK(e.trace.entries[t].token == tokens[t]);
        const auto prefix = std::span<const TokenId>(tokens).first(t + 1);
        CHECK(e.trace.entries[t].stack == run(prefix).outputs);
      }
    }
  }

  TEST_CASE("property: NAN absorption on arbitrary stacks") {
    Rng rng(3);
    for (int trial = 0; trial < 5000; ++trial) {
      Stack s;
      const auto depth = rng.below(5);
      for (std::uint64_t i = 0; i < depth; ++i) s.push_back(rng.coin() ? N : I(rng.uniform(-50, 50)));
      const TokenId op = static_cast<TokenId>(rng.uniform(tok::kAdd, tok::kNot));
      const bool nan_input = (op == tok::kNot) ? (s.empty() || s.back().is_nan())
                                               : (s.size() < 2 || s.back().is_nan() || s[s.size() - 2].is_nan());
      const Stack out = after(s, op);
      if (nan_input) CHECK(out.back().is_nan());
    }
  }

  TEST_CASE("property: appending '!' repairs a single zero output") {
    // Exhaustive over the published instructions up to length 4.
    const std::vector<TokenId> pub(published_tokens().begin(), published_tokens().end());
    std::size_t repaired = 0;
    for (std::size_t len = 1; len <= 4; ++len) {
      oracle::for_each_sequence(pub, len, [&](const std::vector<TokenId>& seq) {
        const auto r = run(std::span<const TokenId>(seq));
        if (r.outputs != Stack{I(0)}) return;
        const Program fixed = negate_repair(Program{seq, SymbolForm::Standard});
        CHECK(classify(fixed).is_true());
        CHECK(fixed.size() == seq.size() + 1);
        ++repaired;
      });
    }
    CHECK(repaired > 0);
  }
}
