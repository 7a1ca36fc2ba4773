#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cadmus/isa.hpp"
#include "cadmus/templates.hpp"

namespace cadmus {

inline constexpr int kDatasetFormatVersion = 1;

enum class DataFormat { Text, Binary };

std::string_view format_extension(DataFormat format);

struct SplitInfo {
  double train = 0.9;
  double validation = 0.1;
  std::uint64_t seed = 0;
  // Which side of the split this file holds: "train" or "validation".
  std::string role;
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  DataFormat format = DataFormat::Text;
  std::optional<MixtureSpec> mixture;
  std::string vocabulary_hash;
  SymbolForm form = SymbolForm::Standard;
  std::vector<std::pair<std::string, std::uint64_t>> counts_per_template;
  std::optional<SplitInfo> split;
  std::uint64_t master_seed = 0;
  std::uint64_t count = 0;
  std::string content_digest;
  std::string data_file;

  nlohmann::ordered_json to_json() const;
  static DatasetManifest from_json(const nlohmann::ordered_json& j);
};

// SHA-256 of the instruction-table dump; pins the token-id assignment.
std::string vocabulary_hash();

// Data file is `<base>.txt` or `<base>.bin`; manifest is `<base>.manifest.json`.
std::filesystem::path data_path(const std::filesystem::path& base, DataFormat format);
std::filesystem::path manifest_path(const std::filesystem::path& base);

// Text: one Standard-form program per line. Binary: one byte per token; the
// program's own trailing '.' (id 0) terminates it. Every program must end in
// its only '.'; anything else throws std::invalid_argument.
std::string serialize_programs(std::span<const Program> programs, DataFormat format);
std::vector<Program> parse_programs(std::string_view bytes, DataFormat format);

// Writes the data file and manifest, filling in count, digest, data_file,
// format, and vocabulary hash. Returns the content digest.
std::string write_dataset(std::span<const Program> programs, DatasetManifest& manifest,
                          const std::filesystem::path& base);

struct Dataset {
  std::vector<Program> programs;
  DatasetManifest manifest;
};

// `base` may also name the manifest file directly. Throws DigestMismatch,
// UnknownFormatVersion, IoError.
Dataset read_dataset(const std::filesystem::path& base);

// Template label of every program, recovered from the mixture layout.
std::vector<TemplateKind> labels_from_manifest(const DatasetManifest& manifest);

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Stratified seeded partition. The validation size is round(n * validation)
// and is apportioned across strata by largest remainder, so each stratum's
// share is within one sample of exact. Indices keep dataset order.
SplitResult split_indices(std::span<const std::size_t> strata, double train, double validation, std::uint64_t seed);

struct SplitPrograms {
  std::vector<LabeledProgram> train;
  std::vector<LabeledProgram> validation;
};
SplitPrograms split(std::span<const LabeledProgram> dataset, double train, double validation, std::uint64_t seed);

struct WrittenDataset {
  std::filesystem::path base;
  DatasetManifest manifest;
};

// Generates the mixture and writes it whole, or as `<base>.train` and
// `<base>.validation` when a split is requested.
std::vector<WrittenDataset> write_mixture_dataset(const MixtureSpec& mix, const std::filesystem::path& base,
                                                  DataFormat format, const std::optional<SplitInfo>& split_info,
                                                  unsigned threads = 0);

// Rebuilds the exact data-file bytes described by a manifest.
std::string regenerate_bytes(const DatasetManifest& manifest, unsigned threads = 0);

}  // namespace cadmus
