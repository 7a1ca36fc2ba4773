// cadmus: command-line front end for the VM, samplers, enumerator, and
// evaluation harness.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cadmus/corpus.hpp"
#include "cadmus/digest.hpp"
#include "cadmus/enumerate.hpp"
#include "cadmus/error.hpp"
#include "cadmus/harness.hpp"
#include "cadmus/isa.hpp"
#include "cadmus/templates.hpp"
#include "cadmus/vm.hpp"

namespace fs = std::filesystem;
using namespace cadmus;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct Globals {
  std::uint64_t seed = 0;
  std::string form = "std";
  std::string output = ".";
  bool quiet = false;
};

struct VmOptions {
  std::size_t max_steps = 4096;
  std::size_t max_depth = 16;
};

struct EnumOptions {
  std::size_t length = 5;
  std::string alphabet = "0123456789+-*/%xn";
};

struct GridOptions {
  std::int64_t min = -20;
  std::int64_t max = 20;
  std::size_t k = 10;
  std::string values;  // optional value-set cache
};

SymbolForm form_or_die(const std::string& name) {
  const auto f = parse_form(name);
  if (!f) throw CLI::ValidationError("--form", "expected std or alt, got '" + name + "'");
  return *f;
}

VmConfig vm_config(const VmOptions& o) {
  VmConfig c;
  c.max_steps = o.max_steps;
  c.max_call_depth = o.max_depth;
  return c;
}

fs::path out_path(const Globals& g, const std::string& name) { return fs::path(g.output) / name; }

void note(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

ValueProgramSet load_values(const EnumOptions& e, const std::string& cache) {
  if (!cache.empty()) return read_value_set(cache);
  const Program alphabet = encode(e.alphabet);
  return enum_value_programs(e.length, alphabet.tokens);
}

GridSpec grid_spec(const Globals& g, const GridOptions& o) {
  GridSpec spec;
  spec.x_range = spec.y_range = ValueRange{o.min, o.max};
  spec.k = o.k;
  spec.seed = g.seed;
  return spec;
}

nlohmann::ordered_json stack_json(const Stack& stack) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Value& v : stack) {
    if (v.is_nan()) {
      arr.push_back("NAN");
    } else {
      arr.push_back(v.get());
    }
  }
  return arr;
}

void write_results(const Globals& g, const std::string& name, const GridResult& result, const nlohmann::ordered_json& spec) {
  const auto csv = out_path(g, name + ".csv");
  const auto js = out_path(g, name + ".json");
  write_file(csv, result.to_csv());
  write_file(js, result.summary(spec).dump(2) + "\n");
  note(g, "wrote " + csv.string() + " and " + js.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Postfix stack VM toolkit: execution, true-program sampling, enumeration, and grid evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read option defaults from a TOML/INI file");

  Globals g;
  if (const char* env = std::getenv("CADMUS_SEED")) {
    try {
      g.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "CADMUS_SEED must be an unsigned integer\n";
      return kExitUsage;
    }
  }
  app.add_option("--seed", g.seed, "Master seed (falls back to $CADMUS_SEED)")->capture_default_str();
  app.add_option("--form", g.form, "Symbol form: std or alt")->capture_default_str();
  app.add_option("--output", g.output, "Output directory")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress the resolved-config log and progress notes");
  app.fallthrough();

  VmOptions vmo;
  std::string program_text;
  auto add_vm = [&](CLI::App* sub) {
    sub->add_option("program", program_text, "Program text, with or without surrounding brackets")->required();
    sub->add_option("--max-steps", vmo.max_steps)->capture_default_str();
    sub->add_option("--max-depth", vmo.max_depth)->capture_default_str();
  };

  auto* run_cmd = app.add_subcommand("run", "Execute a program and print its outputs");
  add_vm(run_cmd);
  std::size_t arity = 0;
  run_cmd->add_option("--arity", arity, "Also print the fixed-size top-K output view");

  auto* classify_cmd = app.add_subcommand("classify", "Print TRUE or FALSE; exit 0 for true-programs, 1 otherwise");
  add_vm(classify_cmd);

  auto* trace_cmd = app.add_subcommand("trace", "Print one JSON line per consumed token");
  add_vm(trace_cmd);

  auto* transcode_cmd = app.add_subcommand("transcode", "Rewrite a program between symbol forms");
  std::string from_form = "std";
  std::string to_form = "alt";
  transcode_cmd->add_option("text", program_text)->required();
  transcode_cmd->add_option("--from", from_form)->capture_default_str();
  transcode_cmd->add_option("--to", to_form)->capture_default_str();

  auto* sample_cmd = app.add_subcommand("sample", "Write a corpus drawn from one template");
  std::string template_name_opt = "basic_math";
  std::uint64_t count = 100;
  std::int64_t value_bound = 20;
  std::optional<int> min_size;
  std::optional<int> max_size;
  std::string name;
  bool binary = false;
  unsigned threads = 0;
  sample_cmd->add_option("--template", template_name_opt, "basic_math|equality|ordering|subroutines|random")->capture_default_str();
  sample_cmd->add_option("--count", count)->capture_default_str();
  sample_cmd->add_option("--value-bound", value_bound)->capture_default_str();
  sample_cmd->add_option("--min-size", min_size);
  sample_cmd->add_option("--max-size", max_size);
  sample_cmd->add_option("--name", name, "Dataset base name (default: the template name)");
  sample_cmd->add_flag("--binary", binary, "Write the one-byte-per-token format");
  sample_cmd->add_option("--threads", threads)->capture_default_str();

  auto* mixture_cmd = app.add_subcommand("mixture", "Write a multi-template corpus at the standard template ratios");
  std::uint64_t divisor = 4000;
  std::optional<double> split_ratio;
  mixture_cmd->add_option("--divisor", divisor, "Scale the 10M:10M:10M:10M:200k ratios down by this factor")->capture_default_str();
  mixture_cmd->add_option("--value-bound", value_bound)->capture_default_str();
  mixture_cmd->add_option("--name", name, "Dataset base name (default: mixture)");
  mixture_cmd->add_flag("--binary", binary);
  mixture_cmd->add_option("--split", split_ratio, "Train fraction; writes <name>.train and <name>.validation");
  mixture_cmd->add_option("--threads", threads)->capture_default_str();

  EnumOptions eo;
  auto add_enum = [&](CLI::App* sub) {
    sub->add_option("--length", eo.length)->capture_default_str();
    sub->add_option("--alphabet", eo.alphabet, "Standard glyphs of the value-program alphabet")->capture_default_str();
  };
  auto* enum_cmd = app.add_subcommand("enum", "Enumerate value programs and write the cache file");
  add_enum(enum_cmd);
  enum_cmd->add_option("--name", name, "Cache file name (default: values.txt)");

  GridOptions go;
  auto add_grid = [&](CLI::App* sub) {
    sub->add_option("--min", go.min, "Smallest X and Y")->capture_default_str();
    sub->add_option("--max", go.max, "Largest X and Y")->capture_default_str();
    sub->add_option("-k", go.k, "Programs per cell")->capture_default_str();
    sub->add_option("--values", go.values, "Value-set cache written by `enum`");
    add_enum(sub);
  };
  auto* grid_cmd = app.add_subcommand("grid", "Write the comparison-grid dataset (JSON lines)");
  add_grid(grid_cmd);
  grid_cmd->add_option("--name", name, "File name (default: grid.jsonl)");

  std::string grid_file;
  std::string predictor_cmd;
  std::string builtin;
  double timeout_s = 60;
  bool full_vocab = false;
  std::int64_t in_dist_bound = 20;
  std::string responses_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a predictor on a grid dataset");
  eval_cmd->add_option("--grid", grid_file, "Grid dataset written by `grid`")->required();
  auto* pred_opt = eval_cmd->add_option("--predictor", predictor_cmd, "Command speaking the JSON-lines protocol");
  auto* builtin_opt = eval_cmd->add_option("--builtin", builtin, "oracle | majority | random[:seed] | constant:<glyph>");
  pred_opt->excludes(builtin_opt);
  eval_cmd->add_option("--timeout", timeout_s, "Seconds to wait for each response")->capture_default_str();
  eval_cmd->add_flag("--full-vocab", full_vocab, "Do not restrict argmax to the comparison tokens");
  eval_cmd->add_option("--in-dist", in_dist_bound, "Half-width of the in-distribution square")->capture_default_str();
  eval_cmd->add_option("--responses-out", responses_out, "Also write the answers as a responses file");
  eval_cmd->add_option("--name", name, "Results base name (default: results)");

  std::string responses_file;
  auto* score_cmd = app.add_subcommand("score", "Score a responses file against a grid dataset");
  score_cmd->add_option("--grid", grid_file)->required();
  score_cmd->add_option("--responses", responses_file)->required();
  score_cmd->add_option("--in-dist", in_dist_bound)->capture_default_str();
  score_cmd->add_flag("--full-vocab", full_vocab);
  score_cmd->add_option("--name", name, "Results base name (default: scores)");

  std::size_t budget = 2000;
  std::string doc_file;
  auto* prompts_cmd = app.add_subcommand("prompts", "Write LLM prompts for every grid program");
  prompts_cmd->add_option("--grid", grid_file, "Grid dataset (default: build one from the grid options)");
  add_grid(prompts_cmd);
  prompts_cmd->add_option("--budget", budget, "Maximum output tokens recorded with each prompt")->capture_default_str();
  prompts_cmd->add_option("--doc", doc_file, "Instruction text replacing the generated table");
  prompts_cmd->add_option("--name", name, "File name (default: prompts.jsonl)");

  std::string baseline_mode = "conditional";
  auto* baseline_cmd = app.add_subcommand("baseline", "Print the majority-answer baseline for t = 0..length");
  add_enum(baseline_cmd);
  baseline_cmd->add_option("--mode", baseline_mode, "conditional | length-only")->capture_default_str();

  auto* dump_cmd = app.add_subcommand("isa-dump", "Print the instruction table as JSON");

  std::string serve_kind = "oracle";
  auto* oracle_cmd = app.add_subcommand("oracle-predictor", "Serve a built-in predictor over stdin/stdout");
  oracle_cmd->add_option("--kind", serve_kind, "oracle | random[:seed] | constant:<glyph>")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (!g.quiet && !oracle_cmd->parsed()) {
    std::cerr << "# resolved configuration\n"
              << "seed=" << g.seed << "\nform=\"" << g.form << "\"\noutput=\"" << g.output << "\"\n";
    for (const auto* sub : app.get_subcommands()) {
      std::cerr << '[' << sub->get_name() << "]\n" << sub->config_to_str(true, false);
    }
  }

  try {
    const SymbolForm form = form_or_die(g.form);

    if (run_cmd->parsed()) {
      const auto r = run(encode(program_text, form), vm_config(vmo));
      std::cout << to_string(r.outputs) << '\n';
      if (arity > 0) std::cout << to_string(output_view(r.outputs, arity)) << '\n';
      return 0;
    }
    if (classify_cmd->parsed()) {
      const Verdict v = classify(encode(program_text, form), vm_config(vmo));
      std::cout << (v.is_true() ? "TRUE" : "FALSE") << '\n';
      return v.is_true() ? 0 : 1;
    }
    if (trace_cmd->parsed()) {
      const auto r = execute(encode(program_text, form), vm_config(vmo));
      for (const auto& e : r.trace.entries) {
        nlohmann::ordered_json j;
        j["pos"] = e.pos;
        j["token"] = e.token;
        j["stack"] = stack_json(e.stack);
        std::cout << j.dump() << '\n';
      }
      return 0;
    }
    if (transcode_cmd->parsed()) {
      std::cout << transcode(program_text, form_or_die(from_form), form_or_die(to_form)) << '\n';
      return 0;
    }
    if (sample_cmd->parsed()) {
      const auto kind = parse_template(template_name_opt);
      if (!kind) throw CLI::ValidationError("--template", "unknown template '" + template_name_opt + "'");
      MixtureSpec mix;
      mix.seed = g.seed;
      MixtureEntry entry;
      entry.spec = TemplateSpec::defaults(*kind, g.seed);
      entry.spec.value_bound = value_bound;
      if (min_size) entry.spec.min_size = *min_size;
      if (max_size) entry.spec.max_size = *max_size;
      entry.count = count;
      mix.entries.push_back(entry);
      mix.total_count = count;
      const auto base = out_path(g, name.empty() ? std::string(template_name(*kind)) : name);
      for (const auto& w : write_mixture_dataset(mix, base, binary ? DataFormat::Binary : DataFormat::Text, std::nullopt, threads)) {
        note(g, "wrote " + data_path(w.base, w.manifest.format).string() + " (" + std::to_string(w.manifest.count) + " programs)");
      }
      return 0;
    }
    if (mixture_cmd->parsed()) {
      const MixtureSpec mix = standard_mixture(divisor, value_bound, g.seed);
      std::optional<SplitInfo> split_info;
      if (split_ratio) {
        if (*split_ratio < 0 || *split_ratio > 1) throw CLI::ValidationError("--split", "must be in [0, 1]");
        split_info = SplitInfo{*split_ratio, 1.0 - *split_ratio, g.seed, ""};
      }
      const auto base = out_path(g, name.empty() ? "mixture" : name);
      for (const auto& w : write_mixture_dataset(mix, base, binary ? DataFormat::Binary : DataFormat::Text, split_info, threads)) {
        note(g, "wrote " + data_path(w.base, w.manifest.format).string() + " (" + std::to_string(w.manifest.count) + " programs)");
      }
      return 0;
    }
    if (enum_cmd->parsed()) {
      const auto set = load_values(eo, "");
      const auto path = out_path(g, name.empty() ? "values.txt" : name);
      write_value_set(path, set);
      note(g, "wrote " + path.string() + " (" + std::to_string(set.size()) + " programs)");
      return 0;
    }
    if (grid_cmd->parsed()) {
      const auto items = build_grid(grid_spec(g, go), load_values(eo, go.values));
      const auto path = out_path(g, name.empty() ? "grid.jsonl" : name);
      write_grid(path, items);
      note(g, "wrote " + path.string() + " (" + std::to_string(items.size()) + " prefixes)");
      return 0;
    }
    if (eval_cmd->parsed()) {
      const auto items = read_grid(grid_file);
      std::unique_ptr<Predictor> predictor;
      nlohmann::ordered_json spec;
      spec["grid"] = fs::path(grid_file).filename().string();
      spec["grid_sha256"] = sha256_file(grid_file);
      if (!predictor_cmd.empty()) {
        predictor = std::make_unique<ProcessPredictor>(
            predictor_cmd, std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000)));
        spec["predictor"] = "process";
      } else {
        const std::string kind = builtin.empty() ? "oracle" : builtin;
        predictor = builtin_predictor(kind, items, g.seed);
        if (!predictor) throw CLI::ValidationError("--builtin", "unknown predictor '" + kind + "'");
        spec["predictor"] = kind;
      }
      spec["restricted"] = !full_vocab;
      spec["seed"] = g.seed;
      EvalOptions options;
      options.restricted = !full_vocab;
      options.in_dist = {-in_dist_bound, in_dist_bound};
      const GridResult result = run_grid_eval(*predictor, items, options);
      write_results(g, name.empty() ? "results" : name, result, spec);
      if (!responses_out.empty()) write_responses(responses_out, items, result.answers);
      std::cout << "aggregate " << result.summary().at("aggregate").dump() << '\n';
      return 0;
    }
    if (score_cmd->parsed()) {
      const auto items = read_grid(grid_file);
      const GridResult result =
          score_predictions(items, read_file(responses_file), {-in_dist_bound, in_dist_bound}, !full_vocab);
      nlohmann::ordered_json spec;
      spec["grid"] = fs::path(grid_file).filename().string();
      spec["grid_sha256"] = sha256_file(grid_file);
      spec["responses_sha256"] = sha256_file(responses_file);
      write_results(g, name.empty() ? "scores" : name, result, spec);
      std::cout << "aggregate " << result.summary().at("aggregate").dump() << " missing " << result.missing << '\n';
      return 0;
    }
    if (prompts_cmd->parsed()) {
      const auto items = grid_file.empty() ? build_grid(grid_spec(g, go), load_values(eo, go.values)) : read_grid(grid_file);
      std::optional<std::string> doc;
      if (!doc_file.empty()) doc = read_file(doc_file);
      const auto prompts = emit_prompts(items, form, doc, budget);
      const auto path = out_path(g, name.empty() ? "prompts.jsonl" : name);
      write_prompts(path, prompts);
      note(g, "wrote " + path.string() + " (" + std::to_string(prompts.size()) + " prompts)");
      return 0;
    }
    if (baseline_cmd->parsed()) {
      BaselineMode mode;
      if (baseline_mode == "conditional") {
        mode = BaselineMode::PrefixConditional;
      } else if (baseline_mode == "length-only") {
        mode = BaselineMode::LengthOnly;
      } else {
        throw CLI::ValidationError("--mode", "expected conditional or length-only");
      }
      const auto curve = majority_baseline_curve(load_values(eo, ""), mode);
      for (std::size_t t = 0; t < curve.size(); ++t) std::cout << t << ' ' << nlohmann::json(curve[t]).dump() << '\n';
      return 0;
    }
    if (dump_cmd->parsed()) {
      std::cout << instruction_table_json(true) << '\n';
      return 0;
    }
    if (oracle_cmd->parsed()) {
      auto predictor = builtin_predictor(serve_kind, {}, g.seed);
      if (!predictor) throw CLI::ValidationError("--kind", "unknown predictor '" + serve_kind + "'");
      serve_predictor(*predictor, std::cin, std::cout);
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const UnknownSymbol& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
