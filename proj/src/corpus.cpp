#include "cadmus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "cadmus/digest.hpp"
#include "cadmus/error.hpp"
#include "cadmus/rng.hpp"

namespace cadmus {
namespace {

void check_terminated(const Program& p, std::size_t index) {
  const auto first_end = std::find(p.tokens.begin(), p.tokens.end(), tok::kEnd);
  if (p.tokens.empty() || first_end != p.tokens.end() - 1) {
    throw std::invalid_argument("program " + std::to_string(index) + " must end with its only '.'");
  }
}

std::vector<std::pair<std::string, std::uint64_t>> count_templates(std::span<const LabeledProgram> programs) {
  std::map<std::size_t, std::uint64_t> counts;
  for (const auto& p : programs) ++counts[static_cast<std::size_t>(p.kind)];
  std::vector<std::pair<std::string, std::uint64_t>> out;
  for (const auto& [kind, n] : counts) out.emplace_back(template_name(static_cast<TemplateKind>(kind)), n);
  return out;
}

std::vector<Program> strip_labels(std::span<const LabeledProgram> programs) {
  std::vector<Program> out;
  out.reserve(programs.size());
  for (const auto& p : programs) out.push_back(p.program);
  return out;
}

std::vector<std::size_t> strata_of(std::span<const LabeledProgram> programs) {
  std::vector<std::size_t> strata;
  strata.reserve(programs.size());
  for (const auto& p : programs) strata.push_back(static_cast<std::size_t>(p.kind));
  return strata;
}

std::vector<LabeledProgram> pick(std::span<const LabeledProgram> programs, std::span<const std::size_t> idx) {
  std::vector<LabeledProgram> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(programs[i]);
  return out;
}

}  // namespace

std::string_view format_extension(DataFormat format) { return format == DataFormat::Text ? "txt" : "bin"; }

nlohmann::ordered_json DatasetManifest::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = format_version;
  j["format"] = format == DataFormat::Text ? "text" : "binary";
  j["data_file"] = data_file;
  j["symbol_form"] = form_name(form);
  j["vocabulary_hash"] = vocabulary_hash;
  j["master_seed"] = master_seed;
  j["count"] = count;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [name, n] : counts_per_template) counts[name] = n;
  j["counts_per_template"] = counts;
  j["mixture"] = mixture ? cadmus::to_json(*mixture) : nlohmann::ordered_json(nullptr);
  if (split) {
    nlohmann::ordered_json s;
    s["train"] = split->train;
    s["validation"] = split->validation;
    s["seed"] = split->seed;
    s["role"] = split->role;
    j["split"] = s;
  } else {
    j["split"] = nullptr;
  }
  j["content_digest"] = content_digest;
  return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::ordered_json& j) {
  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kDatasetFormatVersion) throw UnknownFormatVersion(m.format_version);
  const auto format = j.at("format").get<std::string>();
  if (format != "text" && format != "binary") throw std::invalid_argument("unknown data format '" + format + "'");
  m.format = format == "text" ? DataFormat::Text : DataFormat::Binary;
  m.data_file = j.at("data_file").get<std::string>();
  m.form = parse_form(j.at("symbol_form").get<std::string>()).value_or(SymbolForm::Standard);
  m.vocabulary_hash = j.at("vocabulary_hash").get<std::string>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.count = j.at("count").get<std::uint64_t>();
  for (const auto& [name, n] : j.at("counts_per_template").items()) m.counts_per_template.emplace_back(name, n.get<std::uint64_t>());
  if (!j.at("mixture").is_null()) m.mixture = mixture_spec_from_json(j.at("mixture"));
  if (j.contains("split") && !j.at("split").is_null()) {
    const auto& s = j.at("split");
    m.split = SplitInfo{s.at("train").get<double>(), s.at("validation").get<double>(), s.at("seed").get<std::uint64_t>(),
                        s.at("role").get<std::string>()};
  }
  m.content_digest = j.at("content_digest").get<std::string>();
  return m;
}

std::string vocabulary_hash() {
  static const std::string hash = sha256_hex(instruction_table_json());
  return hash;
}

std::filesystem::path data_path(const std::filesystem::path& base, DataFormat format) {
  return base.string() + "." + std::string(format_extension(format));
}

std::filesystem::path manifest_path(const std::filesystem::path& base) { return base.string() + ".manifest.json"; }

std::string serialize_programs(std::span<const Program> programs, DataFormat format) {
  std::string out;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    const Program& p = programs[i];
    check_terminated(p, i);
    if (format == DataFormat::Text) {
      out += decode(p, SymbolForm::Standard);
      out += '\n';
    } else {
      for (TokenId t : p.tokens) {
        if (t >= kVocabularySize) throw std::invalid_argument("token id out of vocabulary in program " + std::to_string(i));
        out.push_back(static_cast<char>(t));
      }
    }
  }
  return out;
}

std::vector<Program> parse_programs(std::string_view bytes, DataFormat format) {
  std::vector<Program> programs;
  if (format == DataFormat::Text) {
    std::size_t start = 0;
    while (start < bytes.size()) {
      const auto nl = bytes.find('\n', start);
      if (nl == std::string_view::npos) throw Error("text dataset does not end with a newline");
      programs.push_back(encode(bytes.substr(start, nl - start), SymbolForm::Standard));
      start = nl + 1;
    }
  } else {
    Program current;
    for (char c : bytes) {
      const auto t = static_cast<TokenId>(static_cast<unsigned char>(c));
      if (t >= kVocabularySize) throw Error("binary dataset contains byte " + std::to_string(t) + " outside the vocabulary");
      current.tokens.push_back(t);
      if (t == tok::kEnd) {
        programs.push_back(std::move(current));
        current = Program{};
      }
    }
    if (!current.tokens.empty()) throw Error("binary dataset ends without a terminator");
  }
  return programs;
}

std::string write_dataset(std::span<const Program> programs, DatasetManifest& manifest, const std::filesystem::path& base) {
  const std::string bytes = serialize_programs(programs, manifest.format);
  const auto data = data_path(base, manifest.format);
  manifest.format_version = kDatasetFormatVersion;
  manifest.form = SymbolForm::Standard;
  manifest.vocabulary_hash = vocabulary_hash();
  manifest.count = programs.size();
  manifest.content_digest = sha256_hex(bytes);
  manifest.data_file = data.filename().string();
  write_file(data, bytes);
  write_file(manifest_path(base), manifest.to_json().dump(2) + "\n");
  return manifest.content_digest;
}

Dataset read_dataset(const std::filesystem::path& base_or_manifest) {
  std::filesystem::path mpath = base_or_manifest;
  const std::string suffix = ".manifest.json";
  const std::string s = mpath.string();
  if (s.size() < suffix.size() || s.compare(s.size() - suffix.size(), suffix.size(), suffix) != 0) {
    mpath = manifest_path(base_or_manifest);
  }
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_file(mpath));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("malformed manifest " + mpath.string() + ": " + e.what());
  }
  Dataset ds;
  ds.manifest = DatasetManifest::from_json(j);
  const std::string bytes = read_file(mpath.parent_path() / ds.manifest.data_file);
  const std::string digest = sha256_hex(bytes);
  if (digest != ds.manifest.content_digest) throw DigestMismatch(ds.manifest.content_digest, digest);
  ds.programs = parse_programs(bytes, ds.manifest.format);
  if (ds.programs.size() != ds.manifest.count) throw Error("manifest count does not match data file");
  return ds;
}

std::vector<TemplateKind> labels_from_manifest(const DatasetManifest& manifest) {
  if (!manifest.mixture) throw std::invalid_argument("manifest has no mixture; labels are unavailable");
  const auto layout = mixture_layout(*manifest.mixture);
  std::vector<TemplateKind> labels;
  labels.reserve(layout.size());
  for (const auto& [entry, ordinal] : layout) labels.push_back(manifest.mixture->entries[entry].spec.kind);
  if (!manifest.split) return labels;
  std::vector<std::size_t> strata;
  for (TemplateKind k : labels) strata.push_back(static_cast<std::size_t>(k));
  const auto parts = split_indices(strata, manifest.split->train, manifest.split->validation, manifest.split->seed);
  const auto& idx = manifest.split->role == "validation" ? parts.validation : parts.train;
  std::vector<TemplateKind> selected;
  for (std::size_t i : idx) selected.push_back(labels[i]);
  return selected;
}

SplitResult split_indices(std::span<const std::size_t> strata, double train, double validation, std::uint64_t seed) {
  if (train < 0 || validation < 0 || std::abs(train + validation - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < strata.size(); ++i) members[strata[i]].push_back(i);

  const auto total_val = static_cast<std::size_t>(std::llround(static_cast<double>(strata.size()) * validation));
  std::vector<std::pair<double, std::size_t>> remainders;
  std::map<std::size_t, std::size_t> val_count;
  std::size_t assigned = 0;
  for (const auto& [stratum, idx] : members) {
    const double exact = static_cast<double>(idx.size()) * validation;
    const auto base = static_cast<std::size_t>(std::floor(exact));
    val_count[stratum] = base;
    assigned += base;
    remainders.emplace_back(exact - std::floor(exact), stratum);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total_val && k < remainders.size(); ++k, ++assigned) ++val_count[remainders[k].second];

  std::vector<char> is_val(strata.size(), 0);
  for (auto& [stratum, idx] : members) {
    Rng rng(derive_seed({seed, 0x5b117ULL, stratum}));
    rng.shuffle(std::span(idx));
    for (std::size_t i = 0; i < val_count[stratum]; ++i) is_val[idx[i]] = 1;
  }
  SplitResult out;
  for (std::size_t i = 0; i < strata.size(); ++i) (is_val[i] ? out.validation : out.train).push_back(i);
  return out;
}

SplitPrograms split(std::span<const LabeledProgram> dataset, double train, double validation, std::uint64_t seed) {
  const auto strata = strata_of(dataset);
  const auto parts = split_indices(strata, train, validation, seed);
  return {pick(dataset, parts.train), pick(dataset, parts.validation)};
}

std::vector<WrittenDataset> write_mixture_dataset(const MixtureSpec& mix, const std::filesystem::path& base,
                                                  DataFormat format, const std::optional<SplitInfo>& split_info,
                                                  unsigned threads) {
  const auto programs = sample_mixture(mix, threads);
  DatasetManifest manifest;
  manifest.format = format;
  manifest.mixture = mix;
  manifest.master_seed = mix.seed;

  std::vector<WrittenDataset> written;
  if (!split_info) {
    manifest.counts_per_template = count_templates(programs);
    const auto plain = strip_labels(programs);
    write_dataset(plain, manifest, base);
    written.push_back({base, manifest});
    return written;
  }
  const auto parts = split(programs, split_info->train, split_info->validation, split_info->seed);
  for (const auto& [role, subset] : {std::pair{std::string("train"), &parts.train},
                                     std::pair{std::string("validation"), &parts.validation}}) {
    DatasetManifest m = manifest;
    m.split = *split_info;
    m.split->role = role;
    m.counts_per_template = count_templates(*subset);
    const auto plain = strip_labels(*subset);
    const std::filesystem::path sub_base = base.string() + "." + role;
    write_dataset(plain, m, sub_base);
    written.push_back({sub_base, m});
  }
  return written;
}

std::string regenerate_bytes(const DatasetManifest& manifest, unsigned threads) {
  if (!manifest.mixture) throw std::invalid_argument("manifest has no mixture to regenerate from");
  const auto programs = sample_mixture(*manifest.mixture, threads);
  if (!manifest.split) return serialize_programs(strip_labels(programs), manifest.format);
  const auto parts = split(programs, manifest.split->train, manifest.split->validation, manifest.split->seed);
  const auto& subset = manifest.split->role == "validation" ? parts.validation : parts.train;
  return serialize_programs(strip_labels(subset), manifest.format);
}

}  // namespace cadmus
