#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "json.hpp"

#include "cadmus/digest.hpp"
#include "cadmus/enumerate.hpp"
#include "cadmus/error.hpp"
#include "cadmus/isa.hpp"
#include "cadmus/vm.hpp"
#include "oracles.hpp"

using namespace cadmus;
namespace fs = std::filesystem;

namespace {

const ValueProgramSet& default_set() {
  static const ValueProgramSet set = enum_value_programs(5);
  return set;
}

bool contains(const std::vector<Program>& programs, std::string_view text) {
  const Program p = encode(text);
  return std::find(programs.begin(), programs.end(), p) != programs.end();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cadmus_enumerate_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("enumerate") {
  TEST_CASE("membership examples") {
    const auto& set = default_set();
    CHECK(contains(set.programs_for_value(27), "941-*"));
    CHECK_FALSE(contains(set.programs_for_value(1), "11111"));
    CHECK(contains(programs_for_value(set, -20), "045*-"));
    CHECK(programs_for_value(set, 1'000'000'000).empty());
    CHECK_FALSE(set.reachable(1'000'000'000));
  }

  TEST_CASE("default set size is frozen from the brute-force count") {
    const auto brute = oracle::brute_force_values(arithmetic_alphabet(), 5);
    CHECK(default_set().size() == brute.size());
    CHECK(brute.size() == 91300);
  }

  TEST_CASE("oracle equivalence over several alphabets and lengths") {
    const std::vector<std::vector<TokenId>> alphabets{
        arithmetic_alphabet(),
        encode("0123456789+-*/%xn<>=!").tokens,
        encode("12-").tokens,
        encode("90/%").tokens,
    };
    for (const auto& alphabet : alphabets) {
      for (std::size_t len = 0; len <= (alphabet.size() > 10 ? 4u : 6u); ++len) {
        const auto brute = oracle::brute_force_values(alphabet, len);
        const auto set = enum_value_programs(len, alphabet, 2);
        REQUIRE(set.size() == brute.size());
        std::set<std::pair<std::vector<TokenId>, std::int64_t>> want(brute.begin(), brute.end());
        std::set<std::pair<std::vector<TokenId>, std::int64_t>> got;
        for (const auto& e : set.entries()) got.emplace(e.tokens, e.value);
        CHECK(got == want);
      }
    }
  }

  TEST_CASE("entries are sorted and single-valued") {
    const auto& set = default_set();
    CHECK(std::is_sorted(set.entries().begin(), set.entries().end(),
                         [](const ValueProgram& a, const ValueProgram& b) { return a.tokens < b.tokens; }));
    for (std::size_t i = 0; i < set.size(); i += 97) {
      const auto& e = set.entries()[i];
      const auto r = run(std::span<const TokenId>(e.tokens));
      REQUIRE(r.outputs.size() == 1);
      CHECK(r.outputs[0] == Value::of(e.value));
      // NAN never appears along the way.
      for (const auto& t : execute(std::span<const TokenId>(e.tokens)).trace.entries) {
        for (const Value& v : t.stack) CHECK(v.is_int());
      }
    }
  }

  TEST_CASE("index agrees with entries") {
    const auto& set = default_set();
    std::size_t total = 0;
    for (const auto& [value, count] : set.histogram()) {
      const auto idx = set.indices_for(value);
      CHECK(idx.size() == count);
      for (std::size_t i : idx) CHECK(set.entries()[i].value == value);
      total += count;
    }
    CHECK(total == set.size());
    CHECK(set.histogram() == oracle::histogram(oracle::brute_force_values(arithmetic_alphabet(), 5)));
  }

  TEST_CASE("reachability of [-20, 20]") {
    for (std::int64_t v = -20; v <= 20; ++v) CHECK(default_set().reachable(v));
  }

  TEST_CASE("thread count does not change the result") {
    const auto a = enum_value_programs(5, arithmetic_alphabet(), 1);
    const auto b = enum_value_programs(5, arithmetic_alphabet(), 3);
    CHECK(a.entries() == b.entries());
  }

  TEST_CASE("argument errors") {
    CHECK_THROWS_AS(enum_value_programs(8, arithmetic_alphabet()), std::invalid_argument);
    CHECK_THROWS_AS(enum_value_programs(3, encode("12.").tokens), AlphabetContainsEnd);
    CHECK_THROWS_AS(enum_value_programs(3, encode("12a").tokens), std::invalid_argument);
    const std::vector<TokenId> bad{70};
    CHECK_THROWS_AS(enum_value_programs(3, bad), std::invalid_argument);
  }

  TEST_CASE("alphabet is deduplicated and sorted") {
    const auto set = enum_value_programs(3, encode("+2121").tokens);
    CHECK(set.alphabet() == encode("12+").tokens);
  }

  TEST_CASE("majority baseline") {
    const auto& set = default_set();
    const auto curve = majority_baseline_curve(set);
    REQUIRE(curve.size() == 6);
    CHECK(curve[5] == 1.0);
    for (std::size_t t = 0; t + 1 < curve.size(); ++t) CHECK(curve[t] <= curve[t + 1]);
    const auto hist = set.histogram();
    std::size_t mode = 0;
    for (const auto& [v, c] : hist) mode = std::max(mode, c);
    CHECK(curve[0] == static_cast<double>(mode) / static_cast<double>(set.size()));
    const auto brute = oracle::brute_force_values(arithmetic_alphabet(), 5);
    for (std::size_t t = 0; t <= 5; ++t) CHECK(curve[t] == doctest::Approx(oracle::conditional_majority(brute, t)));
    const auto flat = majority_baseline_curve(set, BaselineMode::LengthOnly);
    for (double v : flat) CHECK(v == curve[0]);
  }

  TEST_CASE("grid truth") {
    CHECK(comparison_truth(3, 27) == tok::kLt);
    CHECK(comparison_truth(5, 5) == tok::kEq);
    CHECK(comparison_truth(-1, -7) == tok::kGt);
  }

  TEST_CASE("grid construction") {
    GridSpec spec;
    spec.seed = 4;
    const auto items = build_grid(spec, default_set());
    CHECK(items.size() == 16810);
    std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> cells;
    for (const auto& item : items) {
      ++cells[{item.x, item.y}];
      REQUIRE(item.prefix.size() == 10);
      const auto lhs = run(std::span<const TokenId>(item.prefix).first(5)).outputs;
      const auto rhs = run(std::span<const TokenId>(item.prefix).subspan(5)).outputs;
      CHECK(lhs == Stack{Value::of(item.x)});
      CHECK(rhs == Stack{Value::of(item.y)});
      CHECK(item.truth == comparison_truth(item.x, item.y));
      std::vector<TokenId> full = item.prefix;
      full.push_back(item.truth);
      CHECK(classify(std::span<const TokenId>(full)).is_true());
    }
    CHECK(cells.size() == 1681);
    for (const auto& [cell, n] : cells) CHECK(n == 10);
    CHECK(std::is_sorted(items.begin(), items.end(), [](const GridItem& a, const GridItem& b) {
      return std::tie(a.x, a.y, a.slot) < std::tie(b.x, b.y, b.slot);
    }));
    // Same seed, same grid; different seed, different draws.
    CHECK(build_grid(spec, default_set()) == items);
    spec.seed = 5;
    CHECK(build_grid(spec, default_set()) != items);
  }

  TEST_CASE("grid comparison subset and errors") {
    GridSpec spec;
    spec.x_range = spec.y_range = {-3, 3};
    spec.k = 2;
    spec.comparison_set = {tok::kEq};
    const auto eq = build_grid(spec, default_set());
    CHECK(eq.size() == 14);
    for (const auto& item : eq) CHECK(item.x == item.y);
    spec.comparison_set = {tok::kLt, tok::kGt, tok::kEq};
    spec.x_range = {0, 100000};
    CHECK_THROWS_AS(build_grid(spec, default_set()), UnreachableValue);
    spec.x_range = {0, 1};
    spec.k = 0;
    CHECK_THROWS_AS(build_grid(spec, default_set()), std::invalid_argument);
  }

  TEST_CASE("grid file round trip") {
    GridSpec spec;
    spec.x_range = spec.y_range = {-2, 2};
    spec.k = 3;
    const auto items = build_grid(spec, default_set());
    const auto path = scratch("grid.jsonl");
    write_grid(path, items);
    CHECK(read_grid(path) == items);
    const std::string first_line = read_file(path).substr(0, read_file(path).find('\n'));
    const auto j = nlohmann::json::parse(first_line);
    CHECK(j.contains("prefix_tokens"));
    CHECK(j.contains("truth_token"));
    CHECK(j["x"] == -2);
    CHECK_THROWS_AS(read_grid(scratch("missing.jsonl")), IoError);
  }

  TEST_CASE("value set cache round trip and digest check") {
    const auto set = enum_value_programs(3, arithmetic_alphabet(), 1);
    const auto path = scratch("values3.txt");
    write_value_set(path, set);
    const auto back = read_value_set(path);
    CHECK(back.entries() == set.entries());
    CHECK(back.length() == 3);
    CHECK(back.alphabet() == set.alphabet());
    std::string bytes = read_file(path);
    bytes[0] = bytes[0] == '1' ? '2' : '1';
    write_file(path, bytes);
    CHECK_THROWS_AS(read_value_set(path), DigestMismatch);
  }
}
