#include "cadmus/templates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "cadmus/error.hpp"
#include "cadmus/rng.hpp"

namespace cadmus {
namespace {

constexpr std::array<TokenId, 7> kArithmeticOps{tok::kAdd, tok::kSub, tok::kMul, tok::kFloorDiv,
                                                tok::kMod, tok::kMax, tok::kMin};

constexpr std::array<std::string_view, kTemplateKindCount> kTemplateNames{"basic_math", "equality", "ordering",
                                                                         "subroutines", "random"};

// Salt separating the per-kind streams that share a template seed.
constexpr std::uint64_t kind_salt(TemplateKind kind) { return 0xc0ffee00ULL + static_cast<std::uint64_t>(kind); }

std::optional<std::int64_t> apply_binary(TokenId op, std::int64_t a, std::int64_t b) {
  Stack s{Value::of(a), Value::of(b)};
  apply_stack_effect(s, OpCode::from_token(op));
  if (s.size() != 1 || s.back().is_nan()) return std::nullopt;
  return s.back().get();
}

bool in_bound(std::int64_t v, std::int64_t bound) { return v >= -bound && v <= bound; }

// Random tree with exactly `ops` internal nodes. Fails when any subtree
// value is NAN or leaves [-bound, bound].
std::optional<Expr> grow(Rng& rng, int ops, std::int64_t bound) {
  if (ops == 0) {
    const int d = static_cast<int>(rng.below(10));
    return Expr{{tok::digit(d)}, d};
  }
  const TokenId op = kArithmeticOps[rng.below(kArithmeticOps.size())];
  const int left_ops = static_cast<int>(rng.below(static_cast<std::uint64_t>(ops)));
  auto left = grow(rng, left_ops, bound);
  if (!left) return std::nullopt;
  auto right = grow(rng, ops - 1 - left_ops, bound);
  if (!right) return std::nullopt;
  const auto v = apply_binary(op, left->value, right->value);
  if (!v || !in_bound(*v, bound)) return std::nullopt;
  Expr out{std::move(left->postfix), *v};
  out.postfix.insert(out.postfix.end(), right->postfix.begin(), right->postfix.end());
  out.postfix.push_back(op);
  return out;
}

Expr random_expr(Rng& rng, int min_ops, int max_ops, std::int64_t bound) {
  for (;;) {
    const int ops = static_cast<int>(rng.uniform(min_ops, max_ops));
    if (auto e = grow(rng, ops, bound)) return std::move(*e);
  }
}

void append(std::vector<TokenId>& out, const std::vector<TokenId>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

TokenId ordering_token(std::int64_t lhs, std::int64_t rhs) {
  if (lhs < rhs) return tok::kLt;
  if (lhs > rhs) return tok::kGt;
  return tok::kEq;
}

std::vector<TokenId> basic_math(Rng& rng, const TemplateSpec& spec) {
  const Expr lhs = random_expr(rng, spec.min_size, spec.max_size, spec.value_bound);
  const int d = static_cast<int>(rng.below(10));
  std::vector<TokenId> out = lhs.postfix;
  out.push_back(tok::digit(d));
  out.push_back(ordering_token(lhs.value, d));
  out.push_back(tok::kEnd);
  return out;
}

std::vector<TokenId> equality(Rng& rng, const TemplateSpec& spec) {
  const Expr lhs = random_expr(rng, spec.min_size, spec.max_size, spec.value_bound);
  for (;;) {
    const Expr rhs = random_expr(rng, spec.min_size, spec.max_size, spec.value_bound);
    if (auto p = close_equality(lhs, rhs)) return std::move(p->tokens);
  }
}

std::vector<TokenId> ordering(Rng& rng, const TemplateSpec& spec) {
  const Expr lhs = random_expr(rng, spec.min_size, spec.max_size, spec.value_bound);
  Expr rhs;
  do {
    rhs = random_expr(rng, spec.min_size, spec.max_size, spec.value_bound);
  } while (rhs.value == lhs.value);
  std::vector<TokenId> out = lhs.postfix;
  append(out, rhs.postfix);
  out.push_back(ordering_token(lhs.value, rhs.value));
  out.push_back(tok::kEnd);
  return out;
}

// f(x) = x op1 e1 op2 e2 ...; emitted as "{e1 op1 e2 op2 ...}", applied to an
// argument expression via 'a', then compared against a right-hand side.
std::vector<TokenId> subroutines(Rng& rng, const TemplateSpec& spec) {
  const std::int64_t bound = spec.value_bound;
  Expr arg;
  std::vector<TokenId> body;
  std::int64_t result = 0;
  for (;;) {
    arg = random_expr(rng, 0, 1, bound);
    body.clear();
    std::int64_t acc = arg.value;
    bool ok = true;
    const int steps = static_cast<int>(rng.uniform(spec.min_size, spec.max_size));
    for (int s = 0; s < steps && ok; ++s) {
      const Expr operand = random_expr(rng, 0, 1, bound);
      const TokenId op = kArithmeticOps[rng.below(kArithmeticOps.size())];
      const auto v = apply_binary(op, acc, operand.value);
      ok = v && in_bound(*v, bound);
      if (ok) acc = *v;
      append(body, operand.postfix);
      body.push_back(op);
    }
    if (ok) {
      result = acc;
      break;
    }
  }

  std::vector<TokenId> comparison;
  if (rng.coin()) {
    const Expr call_value{{}, result};
    for (;;) {
      const Expr rhs = random_expr(rng, 0, 2, bound);
      if (auto closed = close_equality(call_value, rhs)) {
        comparison = std::move(closed->tokens);
        comparison.pop_back();  // the '.' is re-added after layout
        break;
      }
    }
  } else {
    Expr rhs;
    do {
      rhs = random_expr(rng, 0, 2, bound);
    } while (rhs.value == result);
    comparison = rhs.postfix;
    comparison.push_back(ordering_token(result, rhs.value));
  }

  std::vector<TokenId> definition{tok::kDefBegin};
  append(definition, body);
  definition.push_back(tok::kDefEnd);
  std::vector<TokenId> use = arg.postfix;
  use.push_back(tok::call(0));
  append(use, comparison);

  std::vector<TokenId> out;
  if (rng.coin()) {
    out = std::move(definition);
    append(out, use);
  } else {
    out = std::move(use);
    append(out, definition);
  }
  out.push_back(tok::kEnd);
  return out;
}

// Drops tokens after the first '.', then guarantees a trailing '.'.
std::vector<TokenId> terminate(std::vector<TokenId> tokens) {
  const auto end = std::find(tokens.begin(), tokens.end(), tok::kEnd);
  if (end != tokens.end()) {
    tokens.erase(end + 1, tokens.end());
  } else {
    tokens.push_back(tok::kEnd);
  }
  return tokens;
}

std::uint64_t require_uint(const nlohmann::ordered_json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) {
    throw std::invalid_argument(std::string("missing or non-integer field '") + key + "'");
  }
  return j.at(key).get<std::uint64_t>();
}

}  // namespace

std::string_view template_name(TemplateKind kind) { return kTemplateNames[static_cast<std::size_t>(kind)]; }

std::optional<TemplateKind> parse_template(std::string_view name) {
  for (std::size_t i = 0; i < kTemplateNames.size(); ++i) {
    if (kTemplateNames[i] == name) return static_cast<TemplateKind>(i);
  }
  return std::nullopt;
}

TemplateSpec TemplateSpec::defaults(TemplateKind kind, std::uint64_t seed) {
  TemplateSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  switch (kind) {
    case TemplateKind::BasicMath: spec.min_size = 1; spec.max_size = 2; break;
    case TemplateKind::Equality: spec.min_size = 1; spec.max_size = 3; break;
    case TemplateKind::Ordering: spec.min_size = 1; spec.max_size = 3; break;
    case TemplateKind::Subroutines: spec.min_size = 1; spec.max_size = 2; break;
    case TemplateKind::Random: spec.min_size = 3; spec.max_size = 8; break;
  }
  return spec;
}

void TemplateSpec::validate() const {
  if (value_bound < 9) throw std::invalid_argument("value_bound must be >= 9");
  if (value_bound > (std::int64_t{1} << 40)) throw std::invalid_argument("value_bound is unreasonably large");
  const int floor = (kind == TemplateKind::Subroutines || kind == TemplateKind::Random) ? 1 : 0;
  if (min_size < floor) throw std::invalid_argument("min_size too small for template " + std::string(template_name(kind)));
  if (max_size < min_size) throw std::invalid_argument("max_size must be >= min_size");
  if (max_size > 64) throw std::invalid_argument("max_size must be <= 64");
}

std::optional<Expr> parse_expr(std::string_view postfix) {
  const Program p = encode(postfix);
  for (TokenId t : p.tokens) {
    const OpKind k = OpCode::from_token(t).kind;
    if (k != OpKind::PushDigit && std::find(kArithmeticOps.begin(), kArithmeticOps.end(), t) == kArithmeticOps.end()) {
      return std::nullopt;
    }
  }
  const RunResult r = run(p);
  if (r.outputs.size() != 1 || r.outputs.front().is_nan()) return std::nullopt;
  return Expr{p.tokens, r.outputs.front().get()};
}

std::optional<Program> close_equality(const Expr& lhs, const Expr& rhs) {
  const std::int64_t gap = lhs.value - rhs.value;
  if (gap < -9 || gap > 9) return std::nullopt;
  Program p;
  p.tokens = lhs.postfix;
  append(p.tokens, rhs.postfix);
  if (gap != 0) {
    p.tokens.push_back(tok::digit(static_cast<int>(gap > 0 ? gap : -gap)));
    p.tokens.push_back(gap > 0 ? tok::kAdd : tok::kSub);
  }
  p.tokens.push_back(tok::kEq);
  p.tokens.push_back(tok::kEnd);
  return p;
}

Program sample(const TemplateSpec& spec, std::uint64_t index) {
  spec.validate();
  Rng rng(derive_seed({spec.seed, kind_salt(spec.kind), index}));
  for (;;) {
    std::vector<TokenId> tokens;
    switch (spec.kind) {
      case TemplateKind::BasicMath: tokens = basic_math(rng, spec); break;
      case TemplateKind::Equality: tokens = equality(rng, spec); break;
      case TemplateKind::Ordering: tokens = ordering(rng, spec); break;
      case TemplateKind::Subroutines: tokens = subroutines(rng, spec); break;
      case TemplateKind::Random: {
        const auto length = static_cast<std::size_t>(rng.uniform(spec.min_size, spec.max_size));
        tokens = terminate(random_true_program(spec.seed, index, length).tokens);
        break;
      }
    }
    if (classify(std::span<const TokenId>(tokens)).is_true()) return Program{std::move(tokens), SymbolForm::Standard};
  }
}

Program negate_repair(const Program& program, const VmConfig& config) {
  const RunResult r = run(program, config);
  if (classify_outputs(r.outputs) == Classification::TrueProgram) return program;
  if (r.outputs.empty()) throw NotRepairable("program produces no values");
  if (r.halt == HaltReason::StepLimit) throw NotRepairable("program stopped at the step limit");
  for (std::size_t i = 0; i < r.outputs.size(); ++i) {
    if (r.outputs[i].is_nan()) throw NotRepairable("output " + std::to_string(i) + " is NAN");
    if (i + 1 < r.outputs.size() && !truthy(r.outputs[i])) {
      throw NotRepairable("false output " + std::to_string(i) + " is below the top of the stack");
    }
  }
  Program repaired = program;
  // Top-level tokens consumed end at the halting '.', when there is one.
  const auto at = static_cast<std::ptrdiff_t>(r.halt == HaltReason::End ? r.consumed - 1 : program.size());
  repaired.tokens.insert(repaired.tokens.begin() + at, tok::kNot);
  if (!classify(repaired, config).is_true()) throw NotRepairable("negation did not produce a true-program");
  return repaired;
}

Program random_true_program(std::uint64_t seed, std::uint64_t index, std::size_t length, AcceptanceCounter* counter) {
  if (length < 1) throw std::invalid_argument("random program length must be >= 1");
  const auto published = published_tokens();
  Rng rng(derive_seed({seed, kind_salt(TemplateKind::Random), index, length}));
  std::vector<TokenId> tokens(length);
  for (;;) {
    for (auto& t : tokens) t = published[rng.below(published.size())];
    const bool ok = classify(std::span<const TokenId>(tokens)).is_true();
    if (counter) {
      ++counter->attempted;
      if (ok) ++counter->accepted;
    }
    if (ok) return Program{tokens, SymbolForm::Standard};
  }
}

std::vector<std::uint64_t> MixtureSpec::realized_counts() const {
  std::vector<std::uint64_t> counts(entries.size(), 0);
  if (entries.empty()) return counts;
  const bool explicit_counts = std::all_of(entries.begin(), entries.end(), [](const MixtureEntry& e) { return e.count.has_value(); });
  if (explicit_counts) {
    for (std::size_t i = 0; i < entries.size(); ++i) counts[i] = *entries[i].count;
    return counts;
  }
  double weight_sum = 0;
  for (const auto& e : entries) weight_sum += e.weight;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double exact = static_cast<double>(total_count) * entries[i].weight / weight_sum;
    counts[i] = static_cast<std::uint64_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total_count; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
  return counts;
}

std::uint64_t MixtureSpec::realized_total() const {
  const auto counts = realized_counts();
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

void MixtureSpec::validate() const {
  for (const auto& e : entries) {
    e.spec.validate();
    if (!(e.weight > 0)) throw std::invalid_argument("mixture weights must be positive");
  }
  const bool explicit_counts =
      !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const MixtureEntry& e) { return e.count.has_value(); });
  if (explicit_counts && total_count != 0 && realized_total() != total_count) {
    throw std::invalid_argument("per-template counts do not sum to total_count");
  }
}

MixtureSpec standard_mixture(std::uint64_t divisor, std::int64_t value_bound, std::uint64_t seed) {
  if (divisor == 0) throw std::invalid_argument("divisor must be positive");
  MixtureSpec mix;
  mix.seed = seed;
  constexpr std::array<std::pair<TemplateKind, std::uint64_t>, 5> kStandardCounts{{
      {TemplateKind::BasicMath, 10'000'000},
      {TemplateKind::Equality, 10'000'000},
      {TemplateKind::Ordering, 10'000'000},
      {TemplateKind::Subroutines, 10'000'000},
      {TemplateKind::Random, 200'000},
  }};
  for (const auto& [kind, count] : kStandardCounts) {
    MixtureEntry e;
    e.spec = TemplateSpec::defaults(kind, derive_seed({seed, kind_salt(kind)}));
    e.spec.value_bound = value_bound;
    e.weight = static_cast<double>(count);
    e.count = count / divisor;
    mix.entries.push_back(e);
  }
  mix.total_count = mix.realized_total();
  return mix;
}

std::vector<std::pair<std::uint32_t, std::uint64_t>> mixture_layout(const MixtureSpec& mix) {
  mix.validate();
  const auto counts = mix.realized_counts();
  std::vector<std::pair<std::uint32_t, std::uint64_t>> layout;
  layout.reserve(static_cast<std::size_t>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0})));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::uint64_t k = 0; k < counts[i]; ++k) layout.emplace_back(static_cast<std::uint32_t>(i), k);
  }
  Rng rng(derive_seed({mix.seed, 0x5ca1ab1eULL}));
  rng.shuffle(std::span(layout));
  return layout;
}

void generate_mixture(const MixtureSpec& mix, const std::function<void(const LabeledProgram&)>& sink, unsigned threads) {
  const auto layout = mixture_layout(mix);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  constexpr std::size_t kBlock = 8192;
  std::vector<LabeledProgram> block;
  for (std::size_t start = 0; start < layout.size(); start += kBlock) {
    const std::size_t n = std::min(kBlock, layout.size() - start);
    block.assign(n, LabeledProgram{});
    auto fill = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const auto [entry, ordinal] = layout[start + i];
        block[i] = LabeledProgram{entry, mix.entries[entry].spec.kind, sample(mix.entries[entry].spec, ordinal)};
      }
    };
    if (threads == 1 || n < 256) {
      fill(0, n);
    } else {
      std::vector<std::thread> workers;
      const std::size_t per = (n + threads - 1) / threads;
      for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = t * per;
        const std::size_t hi = std::min(n, lo + per);
        if (lo < hi) workers.emplace_back(fill, lo, hi);
      }
      for (auto& w : workers) w.join();
    }
    for (const auto& p : block) sink(p);
  }
}

std::vector<LabeledProgram> sample_mixture(const MixtureSpec& mix, unsigned threads) {
  std::vector<LabeledProgram> out;
  out.reserve(static_cast<std::size_t>(mix.realized_total()));
  generate_mixture(mix, [&](const LabeledProgram& p) { out.push_back(p); }, threads);
  return out;
}

nlohmann::ordered_json to_json(const TemplateSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = template_name(spec.kind);
  j["value_bound"] = spec.value_bound;
  j["min_size"] = spec.min_size;
  j["max_size"] = spec.max_size;
  j["seed"] = spec.seed;
  return j;
}

nlohmann::ordered_json to_json(const MixtureSpec& mix) {
  nlohmann::ordered_json j;
  j["seed"] = mix.seed;
  j["total_count"] = mix.total_count;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : mix.entries) {
    nlohmann::ordered_json je;
    je["template"] = to_json(e.spec);
    je["weight"] = e.weight;
    je["count"] = e.count ? nlohmann::ordered_json(*e.count) : nlohmann::ordered_json(nullptr);
    j["entries"].push_back(std::move(je));
  }
  return j;
}

TemplateSpec template_spec_from_json(const nlohmann::ordered_json& j) {
  TemplateSpec spec;
  const auto kind = parse_template(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown template kind '" + j.at("kind").get<std::string>() + "'");
  spec.kind = *kind;
  spec.value_bound = j.at("value_bound").get<std::int64_t>();
  spec.min_size = j.at("min_size").get<int>();
  spec.max_size = j.at("max_size").get<int>();
  spec.seed = require_uint(j, "seed");
  spec.validate();
  return spec;
}

MixtureSpec mixture_spec_from_json(const nlohmann::ordered_json& j) {
  MixtureSpec mix;
  mix.seed = require_uint(j, "seed");
  mix.total_count = require_uint(j, "total_count");
  for (const auto& je : j.at("entries")) {
    MixtureEntry e;
    e.spec = template_spec_from_json(je.at("template"));
    e.weight = je.value("weight", 1.0);
    if (je.contains("count") && !je.at("count").is_null()) e.count = je.at("count").get<std::uint64_t>();
    mix.entries.push_back(std::move(e));
  }
  mix.validate();
  return mix;
}

}  // namespace cadmus
