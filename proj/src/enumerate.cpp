#include "cadmus/enumerate.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "cadmus/digest.hpp"
#include "cadmus/error.hpp"
#include "cadmus/rng.hpp"
#include "cadmus/vm.hpp"

namespace cadmus {
namespace {

struct Arity {
  int pops;
  int pushes;
};

Arity arity_of(TokenId t) {
  const OpCode op = OpCode::from_token(t);
  if (op.kind == OpKind::Reserved) return {0, 1};
  const auto info = instruction_info(op);
  return {info.pops, info.pushes};
}

class Enumerator {
 public:
  Enumerator(std::size_t length, std::span<const TokenId> alphabet) : length_(length), alphabet_(alphabet) {
    for (TokenId t : alphabet_) {
      const Arity a = arity_of(t);
      arities_.push_back(a);
      max_shrink_ = std::max(max_shrink_, a.pops - a.pushes);
      max_grow_ = std::max(max_grow_, a.pushes - a.pops);
    }
    stacks_.resize(length_ + 1);
    prefix_.resize(length_);
  }

  void run_from(std::size_t first, std::vector<ValueProgram>& out) {
    stacks_[0].clear();
    if (!try_step(0, first)) return;
    descend(1, out);
  }

 private:
  // Applies alphabet[choice] at position `pos`; false when the branch is dead.
  bool try_step(std::size_t pos, std::size_t choice) {
    const Arity a = arities_[choice];
    const Stack& before = stacks_[pos];
    const int depth = static_cast<int>(before.size());
    if (depth < a.pops) return false;  // underflow reads NAN
    const int after = depth - a.pops + a.pushes;
    const int left = static_cast<int>(length_ - pos - 1);
    if (after - max_shrink_ * left > 1 || after + max_grow_ * left < 1) return false;
    Stack& next = stacks_[pos + 1];
    next = before;
    apply_stack_effect(next, OpCode::from_token(alphabet_[choice]));
    if (!next.empty() && next.back().is_nan()) return false;  // NAN never leaves the stack
    prefix_[pos] = alphabet_[choice];
    return true;
  }

  void descend(std::size_t pos, std::vector<ValueProgram>& out) {
    if (pos == length_) {
      const Stack& s = stacks_[pos];
      if (s.size() == 1 && s.front().is_int()) out.push_back({prefix_, s.front().get()});
      return;
    }
    for (std::size_t c = 0; c < alphabet_.size(); ++c) {
      if (try_step(pos, c)) descend(pos + 1, out);
    }
  }

  std::size_t length_;
  std::span<const TokenId> alphabet_;
  std::vector<Arity> arities_;
  int max_shrink_ = 0;
  int max_grow_ = 0;
  std::vector<Stack> stacks_;
  std::vector<TokenId> prefix_;
};

}  // namespace

ValueProgramSet::ValueProgramSet(std::size_t length, std::vector<TokenId> alphabet, std::vector<ValueProgram> entries)
    : length_(length), alphabet_(std::move(alphabet)), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const ValueProgram& a, const ValueProgram& b) { return a.tokens < b.tokens; });
  for (std::size_t i = 0; i < entries_.size(); ++i) index_[entries_[i].value].push_back(i);
}

std::span<const std::size_t> ValueProgramSet::indices_for(std::int64_t value) const {
  const auto it = index_.find(value);
  if (it == index_.end()) return {};
  return it->second;
}

std::vector<Program> ValueProgramSet::programs_for_value(std::int64_t value) const {
  std::vector<Program> out;
  for (std::size_t i : indices_for(value)) out.push_back(Program{entries_[i].tokens, SymbolForm::Standard});
  return out;
}

std::map<std::int64_t, std::size_t> ValueProgramSet::histogram() const {
  std::map<std::int64_t, std::size_t> h;
  for (const auto& [value, idx] : index_) h[value] = idx.size();
  return h;
}

ValueProgramSet enum_value_programs(std::size_t length, std::span<const TokenId> alphabet_in, unsigned threads) {
  if (length > kMaxEnumerationLength) {
    throw std::invalid_argument("enumeration length " + std::to_string(length) + " exceeds " +
                                std::to_string(kMaxEnumerationLength));
  }
  std::vector<TokenId> alphabet(alphabet_in.begin(), alphabet_in.end());
  std::sort(alphabet.begin(), alphabet.end());
  alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
  for (TokenId t : alphabet) {
    if (t >= kVocabularySize) throw std::invalid_argument("token id " + std::to_string(t) + " is outside the vocabulary");
    const OpKind kind = OpCode::from_token(t).kind;
    if (kind == OpKind::End) throw AlphabetContainsEnd();
    if (kind == OpKind::DefBegin || kind == OpKind::DefEnd || kind == OpKind::Call) {
      throw std::invalid_argument("subroutine tokens are not supported in value-program alphabets");
    }
  }
  if (length == 0 || alphabet.empty()) return ValueProgramSet(length, alphabet, {});

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(alphabet.size()));
  std::vector<std::vector<ValueProgram>> per_first(alphabet.size());
  auto worker = [&](unsigned id) {
    Enumerator e(length, alphabet);
    for (std::size_t first = id; first < alphabet.size(); first += threads) e.run_from(first, per_first[first]);
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  std::vector<ValueProgram> entries;
  for (auto& part : per_first) {
    entries.insert(entries.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return ValueProgramSet(length, std::move(alphabet), std::move(entries));
}

ValueProgramSet enum_value_programs(std::size_t length) {
  const auto alphabet = arithmetic_alphabet();
  return enum_value_programs(length, alphabet);
}

std::vector<Program> programs_for_value(const ValueProgramSet& set, std::int64_t value) {
  return set.programs_for_value(value);
}

double majority_baseline(const ValueProgramSet& set, std::size_t t, BaselineMode mode) {
  if (t > set.length()) throw std::invalid_argument("prefix length exceeds program length");
  const auto& entries = set.entries();
  if (entries.empty()) return 0.0;
  if (mode == BaselineMode::LengthOnly) t = 0;

  std::size_t hits = 0;
  std::vector<std::int64_t> values;
  std::size_t begin = 0;
  while (begin < entries.size()) {
    std::size_t end = begin + 1;
    const auto same_prefix = [&](std::size_t i) {
      return std::equal(entries[begin].tokens.begin(), entries[begin].tokens.begin() + static_cast<std::ptrdiff_t>(t),
                        entries[i].tokens.begin());
    };
    while (end < entries.size() && same_prefix(end)) ++end;
    values.clear();
    for (std::size_t i = begin; i < end; ++i) values.push_back(entries[i].value);
    std::sort(values.begin(), values.end());
    // Longest run in sorted order; the first (smallest) value wins ties.
    std::size_t best = 0;
    for (std::size_t i = 0; i < values.size();) {
      std::size_t j = i;
      while (j < values.size() && values[j] == values[i]) ++j;
      best = std::max(best, j - i);
      i = j;
    }
    hits += best;
    begin = end;
  }
  return static_cast<double>(hits) / static_cast<double>(entries.size());
}

std::vector<double> majority_baseline_curve(const ValueProgramSet& set, BaselineMode mode) {
  std::vector<double> curve;
  for (std::size_t t = 0; t <= set.length(); ++t) curve.push_back(majority_baseline(set, t, mode));
  return curve;
}

void GridSpec::validate() const {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (x_range.count() == 0 || y_range.count() == 0) throw std::invalid_argument("grid ranges must be non-empty");
  if (comparison_set.empty()) throw std::invalid_argument("comparison set must be non-empty");
  for (TokenId t : comparison_set) {
    if (t != tok::kLt && t != tok::kGt && t != tok::kEq) {
      throw std::invalid_argument("comparison set may only contain '<', '>' and '='");
    }
  }
}

TokenId comparison_truth(std::int64_t x, std::int64_t y) {
  if (x < y) return tok::kLt;
  if (x > y) return tok::kGt;
  return tok::kEq;
}

std::vector<GridItem> build_grid(const GridSpec& spec, const ValueProgramSet& set) {
  spec.validate();
  for (const ValueRange& r : {spec.x_range, spec.y_range}) {
    for (std::int64_t v = r.lo; v <= r.hi; ++v) {
      if (!set.reachable(v)) throw UnreachableValue(v);
    }
  }
  const auto& entries = set.entries();
  std::vector<GridItem> items;
  items.reserve(spec.x_range.count() * spec.y_range.count() * spec.k);
  for (std::int64_t x = spec.x_range.lo; x <= spec.x_range.hi; ++x) {
    for (std::int64_t y = spec.y_range.lo; y <= spec.y_range.hi; ++y) {
      const TokenId truth = comparison_truth(x, y);
      if (std::find(spec.comparison_set.begin(), spec.comparison_set.end(), truth) == spec.comparison_set.end()) continue;
      const auto xs = set.indices_for(x);
      const auto ys = set.indices_for(y);
      for (std::size_t slot = 0; slot < spec.k; ++slot) {
        Rng rng(derive_seed({spec.seed, static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y), slot}));
        GridItem item{x, y, slot, entries[xs[rng.below(xs.size())]].tokens, truth};
        const auto& py = entries[ys[rng.below(ys.size())]].tokens;
        item.prefix.insert(item.prefix.end(), py.begin(), py.end());
        items.push_back(std::move(item));
      }
    }
  }
  return items;
}

void write_grid(const std::filesystem::path& path, std::span<const GridItem> items) {
  std::string out;
  for (const auto& item : items) {
    nlohmann::ordered_json j;
    j["x"] = item.x;
    j["y"] = item.y;
    j["slot"] = item.slot;
    j["prefix_tokens"] = item.prefix;
    j["truth_token"] = item.truth;
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<GridItem> read_grid(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<GridItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GridItem item;
      item.x = j.at("x").get<std::int64_t>();
      item.y = j.at("y").get<std::int64_t>();
      item.slot = j.at("slot").get<std::size_t>();
      item.prefix = j.at("prefix_tokens").get<std::vector<TokenId>>();
      item.truth = j.at("truth_token").get<TokenId>();
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed grid record: " + e.what());
    }
  }
  return items;
}

void write_value_set(const std::filesystem::path& path, const ValueProgramSet& set) {
  std::string data;
  for (const auto& e : set.entries()) {
    data += decode(e.tokens);
    data += '\t';
    data += std::to_string(e.value);
    data += '\n';
  }
  write_file(path, data);
  nlohmann::ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["length"] = set.length();
  manifest["alphabet"] = set.alphabet();
  manifest["alphabet_glyphs"] = decode(set.alphabet());
  manifest["count"] = set.size();
  manifest["sha256"] = sha256_hex(data);
  write_file(path.string() + ".manifest.json", manifest.dump(2) + "\n");
}

ValueProgramSet read_value_set(const std::filesystem::path& path) {
  const auto manifest = nlohmann::json::parse(read_file(path.string() + ".manifest.json"));
  const int version = manifest.at("format_version").get<int>();
  if (version != 1) throw UnknownFormatVersion(version);
  const std::string data = read_file(path);
  const std::string digest = sha256_hex(data);
  if (digest != manifest.at("sha256").get<std::string>()) throw DigestMismatch(manifest.at("sha256").get<std::string>(), digest);
  std::vector<ValueProgram> entries;
  std::istringstream in(data);
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error("malformed value-set line: " + line);
    entries.push_back({encode(line.substr(0, tab)).tokens, std::stoll(line.substr(tab + 1))});
  }
  return ValueProgramSet(manifest.at("length").get<std::size_t>(), manifest.at("alphabet").get<std::vector<TokenId>>(),
                         std::move(entries));
}

}  // namespace cadmus
