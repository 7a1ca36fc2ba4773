#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cadmus/enumerate.hpp"
#include "cadmus/isa.hpp"

namespace cadmus {

// Wire protocol: one JSON object per line over the predictor's stdio.
//   request  {"id":int,"tokens":[int],"candidates":[int]?}
//   response {"id":int,"argmax":int,"scores":{"<id>":float}?}
struct PredictorRequest {
  std::uint64_t id = 0;
  std::vector<TokenId> tokens;
  std::optional<std::vector<TokenId>> candidates;
};

struct PredictorResponse {
  std::uint64_t id = 0;
  TokenId argmax = 0;
  std::optional<std::map<TokenId, double>> scores;
};

std::string to_wire(const PredictorRequest& request);
std::string to_wire(const PredictorResponse& response);
// Both throw ProtocolViolation on malformed lines.
PredictorRequest parse_request(std::string_view line);
PredictorResponse parse_response(std::string_view line);

class Predictor {
 public:
  virtual ~Predictor() = default;
  // Responses may come back in any order and may be incomplete; the
  // harness matches them to requests by id.
  virtual std::vector<PredictorResponse> answer(std::span<const PredictorRequest> requests) = 0;
  // Requests left unanswered because the predictor stopped responding.
  virtual std::size_t timeouts() const { return 0; }
};

// Executes the prefix with each candidate appended and answers the first
// one that makes a true-program.
class VmOraclePredictor final : public Predictor {
 public:
  std::vector<PredictorResponse> answer(std::span<const PredictorRequest> requests) override;
};

class ConstantPredictor final : public Predictor {
 public:
  explicit ConstantPredictor(TokenId token) : token_(token) {}
  std::vector<PredictorResponse> answer(std::span<const PredictorRequest> requests) override;

 private:
  TokenId token_;
};

// Uniform over the candidates (or the whole vocabulary). The draw depends
// only on (seed, request id), so reruns and reorderings agree.
class UniformRandomPredictor final : public Predictor {
 public:
  explicit UniformRandomPredictor(std::uint64_t seed) : seed_(seed) {}
  std::vector<PredictorResponse> answer(std::span<const PredictorRequest> requests) override;

 private:
  std::uint64_t seed_;
};

// Speaks the wire protocol with a child process. Requests are pipelined in
// windows; a request that gets no answer within `timeout` ends the session
// and every still-pending request is counted as a timeout.
class ProcessPredictor final : public Predictor {
 public:
  explicit ProcessPredictor(std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(60),
                            std::size_t window = 256);
  std::vector<PredictorResponse> answer(std::span<const PredictorRequest> requests) override;
  std::size_t timeouts() const override { return timeouts_; }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  std::size_t window_;
  std::size_t timeouts_ = 0;
};

// Most frequent truth token over the grid, ties toward the smaller id.
TokenId majority_truth(std::span<const GridItem> items);

// "oracle", "majority", "random[:seed]", or "constant:<glyph>" (Standard
// glyph). Returns nullptr for an unknown name.
std::unique_ptr<Predictor> builtin_predictor(std::string_view name, std::span<const GridItem> items,
                                             std::uint64_t default_seed = 0);

struct EvalOptions {
  // Restrict argmax to the three comparison tokens; otherwise the request
  // carries no candidate set and any vocabulary id may come back.
  bool restricted = true;
  ValueRange in_dist{-20, 20};
  bool fail_on_timeout = false;
};

struct GridResult {
  ValueRange x_range;
  ValueRange y_range;
  ValueRange in_dist;
  std::size_t k = 0;
  // Row-major, rows = y ascending, cols = x ascending. NaN marks a cell
  // with no items.
  std::vector<double> accuracy;
  std::vector<std::size_t> correct;
  std::vector<std::size_t> totals;
  double aggregate = 0;
  double in_dist_accuracy = 0;
  std::size_t cells = 0;
  std::size_t missing = 0;
  std::size_t timeouts = 0;
  // Per grid item, aligned with the evaluated items.
  std::vector<std::optional<TokenId>> answers;

  double cell(std::int64_t x, std::int64_t y) const;
  std::string to_csv() const;
  nlohmann::ordered_json summary(const nlohmann::ordered_json& spec = nullptr) const;
};

// The single scoring path shared by online and offline evaluation.
GridResult score_answers(std::span<const GridItem> items, std::span<const std::optional<TokenId>> answers,
                         const ValueRange& in_dist);

// Throws ProtocolViolation for responses with unknown or duplicate ids or
// an argmax outside the candidate set; PredictorTimeout when
// fail_on_timeout is set and the predictor stops answering.
GridResult run_grid_eval(Predictor& predictor, std::span<const GridItem> items, const EvalOptions& options = {});

// Responses file: JSON lines {"x","y","slot","argmax"}; unanswered items
// are omitted.
void write_responses(const std::filesystem::path& path, std::span<const GridItem> items,
                     std::span<const std::optional<TokenId>> answers);

// Missing answers score as wrong and are counted in `missing`. Throws
// MalformedResponseFile, or ProtocolViolation for an out-of-set argmax when
// `restricted`.
GridResult score_predictions(std::span<const GridItem> items, std::string_view responses_jsonl,
                             const ValueRange& in_dist = {-20, 20}, bool restricted = true);

struct PromptRecord {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::size_t slot = 0;
  SymbolForm form = SymbolForm::Standard;
  std::size_t max_output_tokens = 0;
  std::string prompt;
};

// Instruction table for the published instructions, rendered in `form`.
std::string render_instruction_table(SymbolForm form);

// One prompt per grid item. `instruction_doc`, when given, replaces the
// generated instruction table.
std::vector<PromptRecord> emit_prompts(std::span<const GridItem> items, SymbolForm form,
                                       const std::optional<std::string>& instruction_doc, std::size_t token_budget);
void write_prompts(const std::filesystem::path& path, std::span<const PromptRecord> prompts);

// Serves `predictor` over the wire protocol until `in` is exhausted. Each
// request is answered and flushed before the next is read. Returns the
// number of requests answered.
std::size_t serve_predictor(Predictor& predictor, std::istream& in, std::ostream& out);

}  // namespace cadmus
