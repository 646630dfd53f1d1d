#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "giet/affine.hpp"
#include "giet/cocycle.hpp"
#include "giet/combinatorics.hpp"
#include "giet/giem.hpp"

namespace giet {

// JSON text in, JSON text out; every parser throws Error(InvalidInput) on malformed input.
CombinatorialData parse_combinatorics_json(const std::string& text);
std::string combinatorics_to_json(const CombinatorialData& pi);

// Sequences are arrays of {"eps":0|1} applied from `start`.
CombinatoricsSequence parse_sequence_json(const CombinatorialData& start, const std::string& text);
std::string sequence_to_json(const CombinatoricsSequence& seq);

GiemConfig parse_giem_json(const std::string& text);
std::string giem_config_to_json(const GiemConfig& config);

AffineIem parse_affine_json(const std::string& text);
std::string affine_to_json(const AffineIem& g);

// Arrays of decimal strings, row-major.
std::string matrix_to_json(const IntMatrix& m);

struct MapSpec {
  enum class Kind { Giem, Affine };
  Kind kind = Kind::Giem;
  GiemConfig giem;
  AffineIem affine;
  GiemConfig config() const { return kind == Kind::Affine ? to_config(affine) : giem; }
};

struct ExperimentConfig {
  std::vector<MapSpec> maps;
  std::optional<std::size_t> depth;
  std::optional<int> precision_bits;
  int quadrature_nodes = 32;
  int samples = 50;
  std::uint64_t rng_seed = 1;
  std::optional<std::size_t> extraction_depth;
  std::map<std::string, double> tolerances;  // all strictly positive
  std::string canonical;                     // canonical JSON of the whole config

  double tolerance(const std::string& name, double fallback) const;
};

// Accepts {"maps":[...]}, {"f":...,"g":...} or a single map block at top level.
ExperimentConfig parse_experiment_json(const std::string& text);
ExperimentConfig load_experiment(const std::filesystem::path& path);

// 64-bit FNV-1a of the canonical config text, as 16 hex digits.
std::string config_hash(const std::string& canonical);
const char* version_string();

struct Provenance {
  std::string config_hash;
  int precision_bits = 0;
  std::string version;
};

// Shortest round-trip decimal without exponent notation.
std::string fixed_decimal(double x);

// CSV with `#`-prefixed provenance lines above the header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const Provenance& provenance, const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& fields);
  std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t columns_ = 0, rows_ = 0;
};

}  // namespace giet
