#include "cadmus/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <tuple>

#include "cadmus/digest.hpp"
#include "cadmus/error.hpp"
#include "cadmus/rng.hpp"
#include "cadmus/subprocess.hpp"
#include "cadmus/vm.hpp"

namespace cadmus {
namespace {

using json = nlohmann::json;

const std::vector<TokenId> kComparisonTokens{tok::kLt, tok::kGt, tok::kEq};

TokenId token_from_json(const json& j, const char* what) {
  if (!j.is_number_integer()) throw ProtocolViolation(std::string(what) + " must be an integer");
  const auto v = j.get<std::int64_t>();
  if (v < 0 || v >= static_cast<std::int64_t>(kVocabularySize)) {
    throw ProtocolViolation(std::string(what) + " " + std::to_string(v) + " is outside the vocabulary");
  }
  return static_cast<TokenId>(v);
}

std::vector<TokenId> tokens_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ProtocolViolation(std::string(what) + " must be an array");
  std::vector<TokenId> out;
  out.reserve(j.size());
  for (const auto& t : j) out.push_back(token_from_json(t, what));
  return out;
}

std::uint64_t id_from_json(const json& j) {
  if (!j.contains("id") || !j.at("id").is_number_integer() || j.at("id").get<std::int64_t>() < 0) {
    throw ProtocolViolation("missing or invalid \"id\"");
  }
  return j.at("id").get<std::uint64_t>();
}

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolViolation(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolViolation("protocol message must be a JSON object");
  return j;
}

bool contains(const std::vector<TokenId>& set, TokenId t) { return std::find(set.begin(), set.end(), t) != set.end(); }

std::string format_accuracy(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

std::string stack_effect(const nlohmann::json& row) {
  const int pops = row.at("pop").get<int>();
  const int pushes = row.at("push").get<int>();
  const auto description = row.at("description").get<std::string>();
  if (pushes == 0) return "( -> )";
  if (pops == 0) return "( -> " + description.substr(description.rfind(' ') + 1) + ")";
  if (pops == 1) return "(a -> " + description + ")";
  return "(a b -> " + description + ")";
}

}  // namespace

std::string to_wire(const PredictorRequest& request) {
  nlohmann::ordered_json j;
  j["id"] = request.id;
  j["tokens"] = request.tokens;
  if (request.candidates) j["candidates"] = *request.candidates;
  return j.dump();
}

std::string to_wire(const PredictorResponse& response) {
  nlohmann::ordered_json j;
  j["id"] = response.id;
  j["argmax"] = response.argmax;
  if (response.scores) {
    nlohmann::ordered_json scores = nlohmann::ordered_json::object();
    for (const auto& [t, s] : *response.scores) scores[std::to_string(t)] = s;
    j["scores"] = scores;
  }
  return j.dump();
}

PredictorRequest parse_request(std::string_view line) {
  const json j = parse_object(line);
  PredictorRequest r;
  r.id = id_from_json(j);
  if (!j.contains("tokens")) throw ProtocolViolation("request lacks \"tokens\"");
  r.tokens = tokens_from_json(j.at("tokens"), "token");
  if (j.contains("candidates") && !j.at("candidates").is_null()) r.candidates = tokens_from_json(j.at("candidates"), "candidate");
  return r;
}

PredictorResponse parse_response(std::string_view line) {
  const json j = parse_object(line);
  PredictorResponse r;
  r.id = id_from_json(j);
  if (!j.contains("argmax")) throw ProtocolViolation("response lacks \"argmax\"");
  r.argmax = token_from_json(j.at("argmax"), "argmax");
  if (j.contains("scores") && !j.at("scores").is_null()) {
    if (!j.at("scores").is_object()) throw ProtocolViolation("\"scores\" must be an object");
    std::map<TokenId, double> scores;
    for (const auto& [key, value] : j.at("scores").items()) {
      if (!value.is_number()) throw ProtocolViolation("score values must be numbers");
      int id = -1;
      try {
        std::size_t used = 0;
        id = std::stoi(key, &used);
        if (used != key.size()) id = -1;
      } catch (const std::exception&) {
      }
      if (id < 0 || id >= static_cast<int>(kVocabularySize)) throw ProtocolViolation("score key '" + key + "' is not a token id");
      scores[static_cast<TokenId>(id)] = value.get<double>();
    }
    r.scores = std::move(scores);
  }
  return r;
}

std::vector<PredictorResponse> VmOraclePredictor::answer(std::span<const PredictorRequest> requests) {
  std::vector<PredictorResponse> out;
  out.reserve(requests.size());
  std::vector<TokenId> program;
  for (const auto& req : requests) {
    const auto& candidates = req.candidates ? *req.candidates : kComparisonTokens;
    PredictorResponse resp{req.id, candidates.empty() ? tok::kEq : candidates.front(), std::nullopt};
    for (TokenId c : candidates) {
      program = req.tokens;
      program.push_back(c);
      if (classify(std::span<const TokenId>(program)).is_true()) {
        resp.argmax = c;
        break;
      }
    }
    out.push_back(resp);
  }
  return out;
}

std::vector<PredictorResponse> ConstantPredictor::answer(std::span<const PredictorRequest> requests) {
  std::vector<PredictorResponse> out;
  out.reserve(requests.size());
  for (const auto& req : requests) out.push_back({req.id, token_, std::nullopt});
  return out;
}

std::vector<PredictorResponse> UniformRandomPredictor::answer(std::span<const PredictorRequest> requests) {
  std::vector<PredictorResponse> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    Rng rng(derive_seed({seed_, req.id}));
    TokenId pick;
    if (req.candidates && !req.candidates->empty()) {
      pick = (*req.candidates)[rng.below(req.candidates->size())];
    } else {
      pick = static_cast<TokenId>(rng.below(kVocabularySize));
    }
    out.push_back({req.id, pick, std::nullopt});
  }
  return out;
}

ProcessPredictor::ProcessPredictor(std::string command, std::chrono::milliseconds timeout, std::size_t window)
    : command_(std::move(command)), timeout_(timeout), window_(std::max<std::size_t>(1, window)) {}

std::vector<PredictorResponse> ProcessPredictor::answer(std::span<const PredictorRequest> requests) {
  Subprocess proc(command_);
  std::vector<PredictorResponse> out;
  out.reserve(requests.size());
  timeouts_ = 0;
  for (std::size_t start = 0; start < requests.size(); start += window_) {
    const std::size_t n = std::min(window_, requests.size() - start);
    std::string batch;
    for (std::size_t i = 0; i < n; ++i) {
      batch += to_wire(requests[start + i]);
      batch += '\n';
    }
    try {
      proc.write(batch);
    } catch (const IoError&) {
      timeouts_ = requests.size() - out.size();
      return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto line = proc.read_line(timeout_);
      if (!line) {
        timeouts_ = requests.size() - start - i;
        return out;
      }
      out.push_back(parse_response(*line));
    }
  }
  proc.wait();
  return out;
}

TokenId majority_truth(std::span<const GridItem> items) {
  std::map<TokenId, std::size_t> counts;
  for (const auto& item : items) ++counts[item.truth];
  TokenId best = tok::kEq;
  std::size_t best_count = 0;
  for (const auto& [t, n] : counts) {
    if (n > best_count) {
      best = t;
      best_count = n;
    }
  }
  return best;
}

std::unique_ptr<Predictor> builtin_predictor(std::string_view name, std::span<const GridItem> items,
                                             std::uint64_t default_seed) {
  if (name == "oracle" || name == "vm-oracle") return std::make_unique<VmOraclePredictor>();
  if (name == "majority") return std::make_unique<ConstantPredictor>(majority_truth(items));
  if (name == "random" || name == "uniform-random") return std::make_unique<UniformRandomPredictor>(default_seed);
  if (name.starts_with("random:")) {
    try {
      return std::make_unique<UniformRandomPredictor>(std::stoull(std::string(name.substr(7))));
    } catch (const std::exception&) {
      return nullptr;
    }
  }
  if (name.starts_with("constant:") && name.size() == 10) {
    const auto t = token_for(name[9], SymbolForm::Standard);
    if (!t) return nullptr;
    return std::make_unique<ConstantPredictor>(*t);
  }
  return nullptr;
}

double GridResult::cell(std::int64_t x, std::int64_t y) const {
  if (!x_range.contains(x) || !y_range.contains(y)) return std::numeric_limits<double>::quiet_NaN();
  return accuracy[static_cast<std::size_t>(y - y_range.lo) * x_range.count() + static_cast<std::size_t>(x - x_range.lo)];
}

std::string GridResult::to_csv() const {
  std::string out = "y\\x";
  for (std::int64_t x = x_range.lo; x <= x_range.hi; ++x) out += "," + std::to_string(x);
  out += '\n';
  for (std::int64_t y = y_range.lo; y <= y_range.hi; ++y) {
    out += std::to_string(y);
    for (std::int64_t x = x_range.lo; x <= x_range.hi; ++x) out += "," + format_accuracy(cell(x, y));
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json GridResult::summary(const nlohmann::ordered_json& spec) const {
  nlohmann::ordered_json j;
  j["aggregate"] = nullable(aggregate);
  j["in_dist"] = nullable(in_dist_accuracy);
  j["in_dist_range"] = {in_dist.lo, in_dist.hi};
  j["k"] = k;
  j["cells"] = cells;
  j["missing"] = missing;
  j["timeouts"] = timeouts;
  j["x_range"] = {x_range.lo, x_range.hi};
  j["y_range"] = {y_range.lo, y_range.hi};
  j["spec"] = spec;
  return j;
}

GridResult score_answers(std::span<const GridItem> items, std::span<const std::optional<TokenId>> answers,
                         const ValueRange& in_dist) {
  if (answers.size() != items.size()) throw std::invalid_argument("answers must align with grid items");
  GridResult r;
  r.in_dist = in_dist;
  r.answers.assign(answers.begin(), answers.end());
  r.aggregate = r.in_dist_accuracy = std::numeric_limits<double>::quiet_NaN();
  if (items.empty()) {
    r.x_range = r.y_range = ValueRange{0, -1};
    return r;
  }
  const auto [xmin, xmax] = std::minmax_element(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  const auto [ymin, ymax] = std::minmax_element(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.y < b.y; });
  r.x_range = {xmin->x, xmax->x};
  r.y_range = {ymin->y, ymax->y};
  const std::size_t nx = r.x_range.count();
  const std::size_t ny = r.y_range.count();
  r.correct.assign(nx * ny, 0);
  r.totals.assign(nx * ny, 0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const std::size_t c = static_cast<std::size_t>(item.y - r.y_range.lo) * nx + static_cast<std::size_t>(item.x - r.x_range.lo);
    ++r.totals[c];
    if (!answers[i]) {
      ++r.missing;
    } else if (*answers[i] == item.truth) {
      ++r.correct[c];
    }
  }
  r.accuracy.assign(nx * ny, std::numeric_limits<double>::quiet_NaN());
  double sum = 0;
  double in_sum = 0;
  std::size_t in_cells = 0;
  for (std::size_t yi = 0; yi < ny; ++yi) {
    for (std::size_t xi = 0; xi < nx; ++xi) {
      const std::size_t c = yi * nx + xi;
      if (r.totals[c] == 0) continue;
      const double acc = static_cast<double>(r.correct[c]) / static_cast<double>(r.totals[c]);
      r.accuracy[c] = acc;
      r.k = std::max(r.k, r.totals[c]);
      ++r.cells;
      sum += acc;
      const std::int64_t x = r.x_range.lo + static_cast<std::int64_t>(xi);
      const std::int64_t y = r.y_range.lo + static_cast<std::int64_t>(yi);
      if (in_dist.contains(x) && in_dist.contains(y)) {
        in_sum += acc;
        ++in_cells;
      }
    }
  }
  if (r.cells) r.aggregate = sum / static_cast<double>(r.cells);
  if (in_cells) r.in_dist_accuracy = in_sum / static_cast<double>(in_cells);
  return r;
}

GridResult run_grid_eval(Predictor& predictor, std::span<const GridItem> items, const EvalOptions& options) {
  std::vector<PredictorRequest> requests;
  requests.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    PredictorRequest req{i, items[i].prefix, std::nullopt};
    if (options.restricted) req.candidates = kComparisonTokens;
    requests.push_back(std::move(req));
  }
  const auto responses = predictor.answer(requests);
  std::vector<std::optional<TokenId>> answers(items.size());
  for (const auto& resp : responses) {
    if (resp.id >= items.size()) throw ProtocolViolation("response id " + std::to_string(resp.id) + " matches no request");
    if (answers[resp.id]) throw ProtocolViolation("duplicate response for id " + std::to_string(resp.id));
    const auto& req = requests[resp.id];
    if (req.candidates && !contains(*req.candidates, resp.argmax)) {
      throw ProtocolViolation("argmax " + std::to_string(resp.argmax) + " for id " + std::to_string(resp.id) +
                              " is outside the candidate set");
    }
    answers[resp.id] = resp.argmax;
  }
  const std::size_t timeouts = predictor.timeouts();
  if (options.fail_on_timeout && timeouts > 0) {
    throw PredictorTimeout(std::to_string(timeouts) + " requests went unanswered");
  }
  GridResult result = score_answers(items, answers, options.in_dist);
  result.timeouts = timeouts;
  return result;
}

void write_responses(const std::filesystem::path& path, std::span<const GridItem> items,
                     std::span<const std::optional<TokenId>> answers) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!answers[i]) continue;
    nlohmann::ordered_json j;
    j["x"] = items[i].x;
    j["y"] = items[i].y;
    j["slot"] = items[i].slot;
    j["argmax"] = *answers[i];
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

GridResult score_predictions(std::span<const GridItem> items, std::string_view responses_jsonl,
                             const ValueRange& in_dist, bool restricted) {
  std::map<std::tuple<std::int64_t, std::int64_t, std::size_t>, std::size_t> key_to_index;
  for (std::size_t i = 0; i < items.size(); ++i) key_to_index[{items[i].x, items[i].y, items[i].slot}] = i;

  std::vector<std::optional<TokenId>> answers(items.size());
  std::istringstream in{std::string(responses_jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw MalformedResponseFile(where + "not valid JSON");
    }
    if (!j.is_object()) throw MalformedResponseFile(where + "expected a JSON object");
    for (const char* field : {"x", "y", "slot", "argmax"}) {
      if (!j.contains(field) || !j.at(field).is_number_integer()) {
        throw MalformedResponseFile(where + "missing or non-integer \"" + field + "\"");
      }
    }
    if (j.at("slot").get<std::int64_t>() < 0) throw MalformedResponseFile(where + "negative slot");
    const auto key = std::make_tuple(j.at("x").get<std::int64_t>(), j.at("y").get<std::int64_t>(), j.at("slot").get<std::size_t>());
    const auto it = key_to_index.find(key);
    if (it == key_to_index.end()) throw MalformedResponseFile(where + "(x, y, slot) is not in the grid");
    if (answers[it->second]) throw MalformedResponseFile(where + "duplicate answer");
    const auto argmax = j.at("argmax").get<std::int64_t>();
    if (argmax < 0 || argmax >= static_cast<std::int64_t>(kVocabularySize)) {
      throw MalformedResponseFile(where + "argmax is outside the vocabulary");
    }
    if (restricted && !contains(kComparisonTokens, static_cast<TokenId>(argmax))) {
      throw ProtocolViolation(where + "argmax is not a comparison token");
    }
    answers[it->second] = static_cast<TokenId>(argmax);
  }
  return score_answers(items, answers, in_dist);
}

std::string render_instruction_table(SymbolForm form) {
  const auto table = json::parse(instruction_table_json());
  const char* key = form == SymbolForm::Standard ? "std" : "alt";
  std::string out;
  for (TokenId id : published_tokens()) {
    const auto& row = table.at(id);
    out += row.at(key).get<std::string>();
    out += "  ";
    out += stack_effect(row);
    out += '\n';
  }
  return out;
}

std::vector<PromptRecord> emit_prompts(std::span<const GridItem> items, SymbolForm form,
                                       const std::optional<std::string>& instruction_doc, std::size_t token_budget) {
  const std::string table = instruction_doc ? *instruction_doc : render_instruction_table(form);
  const std::string answers = std::string(1, *glyph(tok::kLt, form)) + " " + *glyph(tok::kGt, form) + " " + *glyph(tok::kEq, form);
  std::vector<PromptRecord> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    std::string prompt;
    prompt += "The program below runs on a small postfix stack machine. Each character is one instruction, "
              "executed left to right. An instruction pops its inputs and pushes its results. In the stack "
              "effects, b is the top of the stack and a is the value beneath it; a//b divides rounding toward "
              "negative infinity and a%b is the matching remainder.\n\nInstructions:\n";
    prompt += table;
    prompt += "\nThe program computes two numbers. Give the one instruction that, appended to the program, "
              "compares them so that the machine finishes with 1 on the stack.\n\nProgram: ";
    prompt += decode(item.prefix, form);
    prompt += "\n\nAnswer with exactly one character from: " + answers + "\nAnswer:";
    out.push_back({item.x, item.y, item.slot, form, token_budget, std::move(prompt)});
  }
  return out;
}

void write_prompts(const std::filesystem::path& path, std::span<const PromptRecord> prompts) {
  std::string out;
  for (const auto& p : prompts) {
    nlohmann::ordered_json j;
    j["x"] = p.x;
    j["y"] = p.y;
    j["slot"] = p.slot;
    j["form"] = form_name(p.form);
    j["max_output_tokens"] = p.max_output_tokens;
    j["prompt"] = p.prompt;
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::size_t serve_predictor(Predictor& predictor, std::istream& in, std::ostream& out) {
  std::size_t served = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const PredictorRequest req = parse_request(line);
    for (const auto& resp : predictor.answer(std::span<const PredictorRequest>(&req, 1))) out << to_wire(resp) << '\n';
    out.flush();
    ++served;
  }
  return served;
}

}  // namespace cadmus
