// Acceptance suite: one PASS/FAIL line per criterion, each checked at its
// stated tolerance and time budget. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cadmus/corpus.hpp"
#include "cadmus/digest.hpp"
#include "cadmus/enumerate.hpp"
#include "cadmus/error.hpp"
#include "cadmus/harness.hpp"
#include "cadmus/isa.hpp"
#include "cadmus/rng.hpp"
#include "cadmus/templates.hpp"
#include "cadmus/vm.hpp"
#include "oracles.hpp"

using namespace cadmus;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail = std::string("exception: ") + e.what();
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0 && elapsed > budget_s) c.require(false, "exceeded time budget");
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.2fs", elapsed);
  std::printf("%s  %-34s %8s  %s\n", c.ok ? "PASS" : "FAIL", name.c_str(), timing, c.detail.c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

bool is_true(std::string_view text) { return classify(encode(text)).is_true(); }

int sh(const std::string& cmd) { return std::system((cmd + " >/dev/null").c_str()); }

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "cadmus_acceptance" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

int main() {
  criterion("reference program verdicts", 1.0, [](Check& c) {
    c.require(is_true("34+7=."), "34+7=. should be TRUE");
    c.require(!is_true("34+8=."), "34+8=. should be FALSE");
    c.require(is_true("34+8=!."), "34+8=!. should be TRUE");
    c.require(is_true("12+0>."), "12+0>. should be TRUE");
    c.require(is_true("941-*55*2+=."), "941-*55*2+=. should be TRUE");
    c.detail = c.ok ? "5/5 verdicts" : c.detail;
  });

  criterion("NAN semantics", 0, [](Check& c) {
    for (const char* p : {"90/", "90%", "00/", "00%"}) {
      const Stack s = run(encode(p)).outputs;
      c.require(s.size() == 1 && s[0].is_nan(), std::string(p) + " should give NAN");
    }
    for (TokenId op = tok::kAdd; op <= tok::kNot; ++op) {
      for (const Stack& in : {Stack{Value::nan(), Value::of(3)}, Stack{Value::of(3), Value::nan()}}) {
        Stack s = in;
        if (op == tok::kNot) s = {Value::nan()};
        apply_stack_effect(s, OpCode::from_token(op));
        bool all_nan = !s.empty();
        for (const Value& v : s) all_nan = all_nan && v.is_nan();
        c.require(all_nan, "op " + std::to_string(op) + " with a NAN operand should output only NAN");
      }
    }
    c.require(!is_true("90/!."), "90/!. should be FALSE");
    bool threw = false;
    try {
      negate_repair(encode("90/!."));
    } catch (const NotRepairable&) {
      threw = true;
    }
    c.require(threw, "90/!. should be NotRepairable");
    if (c.ok) c.detail = "div/mod by zero, 11 ops x NAN operands, repair refusal";
  });

  criterion("no-fault totality", 30.0, [](Check& c) {
    Rng rng(20240601);
    std::size_t total_tokens = 0;
    for (int i = 0; i < 100000 && c.ok; ++i) {
      std::vector<TokenId> tokens(rng.below(65));
      for (auto& t : tokens) t = static_cast<TokenId>(rng.below(kVocabularySize));
      const ExecutionResult e = execute(std::span<const TokenId>(tokens));
      const RunResult r = run(std::span<const TokenId>(tokens));
      c.require(e.trace.consumed() == r.consumed, "trace length differs from consumed count");
      c.require(r.consumed <= tokens.size(), "consumed more tokens than the program has");
      for (std::size_t k = 0; k < e.trace.entries.size(); ++k) {
        c.require(e.trace.entries[k].pos == k && e.trace.entries[k].token == tokens[k], "trace is not a token prefix");
      }
      c.require(e.outputs == r.outputs, "execute and run disagree");
      total_tokens += tokens.size();
    }
    if (c.ok) c.detail = "100000 sequences, " + std::to_string(total_tokens) + " tokens";
  });

  criterion("alternate-form fidelity", 0, [](Check& c) {
    std::set<char> alt;
    std::set<TokenId> back;
    for (TokenId id : published_tokens()) {
      const auto g = glyph(id, SymbolForm::Alternate);
      c.require(g.has_value(), "missing alternate glyph");
      if (!g) continue;
      alt.insert(*g);
      back.insert(*token_for(*g, SymbolForm::Alternate));
      c.require(*g == oracle::kAlternateGlyphs[id], "alternate glyph differs from the published table");
    }
    c.require(alt.size() == 22 && back.size() == 22, "alternate map is not a bijection on 22 glyphs");
    c.require(transcode("34+7=.", SymbolForm::Standard, SymbolForm::Alternate) == "+!*1~.", "34+7=. transcodes wrong");
    const TemplateKind kinds[] = {TemplateKind::BasicMath, TemplateKind::Equality, TemplateKind::Ordering,
                                  TemplateKind::Random};
    for (std::uint64_t i = 0; i < 10000; ++i) {
      const Program p = sample(TemplateSpec::defaults(kinds[i % 4], 31), i);
      const std::string s = decode(p);
      const std::string a = transcode(s, SymbolForm::Standard, SymbolForm::Alternate);
      c.require(encode(a, SymbolForm::Alternate) == p, "alternate text does not encode to the same tokens");
      c.require(transcode(a, SymbolForm::Alternate, SymbolForm::Standard) == s, "round trip changed " + s);
    }
    if (c.ok) c.detail = "22-glyph bijection, 10000 round trips";
  });

  criterion("sampler validity + regeneration", 120.0, [](Check& c) {
    MixtureSpec mix;
    mix.seed = 2025;
    for (TemplateKind k : {TemplateKind::BasicMath, TemplateKind::Equality, TemplateKind::Ordering,
                           TemplateKind::Subroutines, TemplateKind::Random}) {
      mix.entries.push_back({TemplateSpec::defaults(k, 2025), 1.0, 10000});
    }
    mix.total_count = 50000;
    const fs::path base = fresh_dir("sampler") / "mixture";
    write_mixture_dataset(mix, base, DataFormat::Binary, std::nullopt);
    const Dataset ds = read_dataset(base);
    c.require(ds.programs.size() == 50000, "dataset does not hold 50000 programs");
    std::size_t false_programs = 0;
    for (const Program& p : ds.programs) false_programs += !classify(p).is_true();
    c.require(false_programs == 0, std::to_string(false_programs) + " sampled programs are not true-programs");
    const std::string regenerated = regenerate_bytes(ds.manifest);
    c.require(regenerated == read_file(data_path(base, DataFormat::Binary)), "regenerated bytes differ");
    c.require(sha256_hex(regenerated) == ds.manifest.content_digest, "regenerated digest differs");
    if (c.ok) c.detail = "50000 true-programs, digest " + ds.manifest.content_digest.substr(0, 12);
  });

  const ValueProgramSet* set_ptr = nullptr;
  ValueProgramSet set_storage;
  std::vector<std::pair<std::vector<TokenId>, std::int64_t>> brute;

  criterion("enumeration oracle equivalence", 120.0, [&](Check& c) {
    set_storage = enum_value_programs(5);
    set_ptr = &set_storage;
    brute = oracle::brute_force_values(arithmetic_alphabet(), 5);
    std::set<std::pair<std::vector<TokenId>, std::int64_t>> want(brute.begin(), brute.end());
    std::set<std::pair<std::vector<TokenId>, std::int64_t>> got;
    for (const auto& e : set_storage.entries()) got.emplace(e.tokens, e.value);
    c.require(got.size() == set_storage.size(), "duplicate entries");
    c.require(got == want, "enumerated set differs from brute force");
    for (std::int64_t v = -20; v <= 20; ++v) c.require(set_storage.reachable(v), std::to_string(v) + " unreachable");
    if (c.ok) c.detail = std::to_string(set_storage.size()) + " programs of 1419857 sequences; [-20,20] reachable";
  });

  criterion("majority baseline", 0, [&](Check& c) {
    c.require(set_ptr != nullptr, "enumeration unavailable");
    if (!set_ptr) return;
    const auto curve = majority_baseline_curve(*set_ptr);
    c.require(curve.size() == 6 && curve[5] == 1.0, "baseline at t=5 is not 1.0");
    for (std::size_t t = 0; t + 1 < curve.size(); ++t) c.require(curve[t] <= curve[t + 1], "baseline decreases");
    std::size_t mode = 0;
    for (const auto& [v, n] : oracle::histogram(brute)) mode = std::max(mode, n);
    c.require(curve[0] == static_cast<double>(mode) / static_cast<double>(brute.size()),
              "t=0 differs from the histogram mode frequency");
    if (c.ok) {
      std::ostringstream d;
      d << "curve";
      for (double v : curve) d << ' ' << v;
      c.detail = d.str();
    }
  });

  criterion("grid ceiling and floor", 60.0, [&](Check& c) {
    const ValueProgramSet set = set_ptr ? *set_ptr : enum_value_programs(5);
    GridSpec spec;
    spec.seed = 7;
    const auto items = build_grid(spec, set);
    c.require(items.size() == 16810, "grid does not hold 1681 x 10 prefixes");
    VmOraclePredictor oracle_pred;
    const auto top = run_grid_eval(oracle_pred, items);
    c.require(top.aggregate == 1.0 && top.cells == 1681, "vm-oracle is not exactly 1.0");
    UniformRandomPredictor rnd(7);
    const auto mid = run_grid_eval(rnd, items);
    c.require(std::abs(mid.aggregate - 1.0 / 3.0) <= 0.05, "uniform-random outside 1/3 +- 0.05");
    ConstantPredictor eq(tok::kEq);
    const auto low = run_grid_eval(eq, items);
    const auto cells = oracle::count_cells(-20, 20);
    const double want = static_cast<double>(cells.eq) / static_cast<double>(cells.lt + cells.gt + cells.eq);
    c.require(low.aggregate == want && cells.eq == 41, "constant '=' is not 41/1681");
    if (c.ok) {
      std::ostringstream d;
      d << "oracle " << top.aggregate << ", random " << mid.aggregate << ", '=' " << low.aggregate;
      c.detail = d.str();
    }
  });

  criterion("end-to-end reproducibility", 0, [](Check& c) {
    const std::string cli = CADMUS_CLI_PATH;
    std::vector<fs::path> dirs;
    for (const char* name : {"e2e_a", "e2e_b"}) {
      const fs::path d = fresh_dir(name);
      dirs.push_back(d);
      const std::string base = cli + " --quiet --seed 11 --output '" + d.string() + "' ";
      const std::string grid = "'" + (d / "grid.jsonl").string() + "'";
      const std::string resp = "'" + (d / "resp.jsonl").string() + "'";
      c.require(sh(base + "grid") == 0, "grid failed");
      c.require(sh(base + "eval --grid " + grid + " --builtin random --responses-out " + resp) == 0, "eval failed");
      c.require(sh(base + "eval --grid " + grid + " --predictor '" + cli + " oracle-predictor' --name oracle") == 0,
                "process eval failed");
      c.require(sh(base + "score --grid " + grid + " --responses " + resp) == 0, "score failed");
    }
    std::size_t compared = 0;
    for (const char* f : {"grid.jsonl", "results.csv", "results.json", "resp.jsonl", "oracle.csv", "oracle.json",
                          "scores.csv", "scores.json"}) {
      c.require(read_file(dirs[0] / f) == read_file(dirs[1] / f), std::string(f) + " differs between runs");
      ++compared;
    }
    c.require(read_file(dirs[0] / "scores.csv") == read_file(dirs[0] / "results.csv"), "offline and online CSV differ");
    if (c.ok) c.detail = std::to_string(compared) + " files byte-identical";
  });

  std::printf("%d failure(s)\n", failures);
  return failures;
}
