#include "giet/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

namespace giet {

using json = nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::InvalidInput, what); }

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("malformed JSON: ") + e.what());
  }
}

// numbers may be given as JSON numbers or decimal strings; strings keep full precision
std::string number_text(const json& v, const std::string& field) {
  static const std::regex decimal(R"([+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)");
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (!std::regex_match(s, decimal)) bad("field '" + field + "' is not a decimal number: " + s);
    return s;
  }
  if (v.is_number()) return v.dump();
  bad("field '" + field + "' must be a number or a decimal string");
}

double number_value(const json& v, const std::string& field) {
  const std::string s = number_text(v, field);
  double x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad("field '" + field + "' is not a number: " + s);
  return x;
}

std::vector<std::string> row_letters(const json& row, const std::string& field) {
  std::vector<std::string> out;
  if (row.is_string()) {
    for (char c : row.get<std::string>()) out.emplace_back(1, c);
  } else if (row.is_array()) {
    for (const auto& x : row) {
      if (!x.is_string()) bad("row '" + field + "' must list letters as strings");
      out.push_back(x.get<std::string>());
    }
  } else {
    bad("row '" + field + "' must be an object, array or string");
  }
  return out;
}

CombinatorialData combinatorics_from(const json& j) {
  if (j.contains("pi") && j["pi"].is_object()) return combinatorics_from(j["pi"]);
  if (!j.contains("pi0") || !j.contains("pi1")) bad("combinatorics need 'pi0' and 'pi1'");
  const json& p0 = j["pi0"];
  const json& p1 = j["pi1"];
  if (!p0.is_object() || !p1.is_object()) return make_pi(row_letters(p0, "pi0"), row_letters(p1, "pi1"));
  std::vector<std::string> alphabet;
  if (j.contains("alphabet")) {
    for (const auto& x : j["alphabet"]) alphabet.push_back(x.get<std::string>());
  } else {
    for (const auto& [k, v] : p0.items()) alphabet.push_back(k);
  }
  std::sort(alphabet.begin(), alphabet.end());
  if (std::adjacent_find(alphabet.begin(), alphabet.end()) != alphabet.end()) bad("alphabet has repeated letters");
  CombinatorialData pi;
  pi.alphabet = alphabet;
  const int d = static_cast<int>(alphabet.size());
  for (const auto* row : {&p0, &p1}) {
    if (static_cast<int>(row->size()) != d) bad("pi0 and pi1 must assign a position to every letter");
    std::vector<int> pos(d, 0);
    std::set<int> seen;
    for (int a = 0; a < d; ++a) {
      if (!row->contains(alphabet[a])) bad("letter '" + alphabet[a] + "' has no position");
      const json& v = (*row)[alphabet[a]];
      if (!v.is_number_integer()) bad("positions must be integers");
      pos[a] = v.get<int>();
      if (pos[a] < 1 || pos[a] > d || !seen.insert(pos[a]).second) bad("positions must be a permutation of 1..d");
    }
    (row == &p0 ? pi.pi0 : pi.pi1) = pos;
  }
  return pi;
}

json combinatorics_json(const CombinatorialData& pi) {
  json j;
  j["alphabet"] = pi.alphabet;
  json p0 = json::object(), p1 = json::object();
  for (int a = 0; a < pi.d(); ++a) {
    p0[pi.alphabet[a]] = pi.pi0[a];
    p1[pi.alphabet[a]] = pi.pi1[a];
  }
  j["pi0"] = p0;
  j["pi1"] = p1;
  return j;
}

// per-letter values as an array in alphabet order or an object keyed by letter
std::vector<std::string> letter_values(const json& v, const CombinatorialData& pi, const std::string& field) {
  std::vector<std::string> out(static_cast<std::size_t>(pi.d()));
  if (v.is_array()) {
    if (static_cast<int>(v.size()) != pi.d()) bad("'" + field + "' needs one entry per letter");
    for (int a = 0; a < pi.d(); ++a) out[a] = number_text(v[a], field);
  } else if (v.is_object()) {
    for (int a = 0; a < pi.d(); ++a) {
      if (!v.contains(pi.alphabet[a])) bad("'" + field + "' misses letter " + pi.alphabet[a]);
      out[a] = number_text(v[pi.alphabet[a]], field);
    }
  } else {
    bad("'" + field + "' must be an array or an object");
  }
  return out;
}

BranchSpec branch_from(const json& b) {
  BranchSpec s;
  if (!b.is_object()) bad("branch entries must be objects");
  if (b.contains("family")) s.family = b["family"].get<std::string>();
  if (b.contains("params")) {
    for (const auto& [k, v] : b["params"].items()) {
      if (v.is_boolean())
        s.params[k] = v.get<bool>() ? "true" : "false";
      else
        s.params[k] = number_text(v, k);
    }
  }
  return s;
}

GiemConfig giem_from(const json& j) {
  GiemConfig c;
  c.pi = combinatorics_from(j);
  const char* key = j.contains("domain_lengths") ? "domain_lengths" : "lengths";
  if (!j.contains(key)) bad("map needs 'domain_lengths'");
  c.domain_lengths = letter_values(j[key], c.pi, key);
  if (j.contains("image_lengths")) c.image_lengths = letter_values(j["image_lengths"], c.pi, "image_lengths");
  if (j.contains("branches")) {
    const json& br = j["branches"];
    if (br.is_array()) {
      if (static_cast<int>(br.size()) != c.pi.d()) bad("'branches' needs one entry per letter");
      for (const auto& b : br) c.branches.push_back(branch_from(b));
    } else if (br.is_object()) {
      for (int a = 0; a < c.pi.d(); ++a) {
        if (!br.contains(c.pi.alphabet[a])) bad("'branches' misses letter " + c.pi.alphabet[a]);
        c.branches.push_back(branch_from(br[c.pi.alphabet[a]]));
      }
    } else {
      bad("'branches' must be an array or an object");
    }
  }
  if (j.contains("chart")) {
    const json& h = j["chart"];
    std::array<std::string, 3> cs{"0", "0", "0"};
    const char* names[3] = {"c2", "c3", "c4"};
    for (int i = 0; i < 3; ++i)
      if (h.contains(names[i])) cs[i] = number_text(h[names[i]], names[i]);
    c.chart = cs;
  }
  return c;
}

json giem_json(const GiemConfig& c) {
  json j = combinatorics_json(c.pi);
  j["domain_lengths"] = c.domain_lengths;
  if (!c.image_lengths.empty()) j["image_lengths"] = c.image_lengths;
  if (!c.branches.empty()) {
    json br = json::array();
    for (const auto& b : c.branches) br.push_back({{"family", b.family}, {"params", b.params}});
    j["branches"] = br;
  }
  if (c.chart) j["chart"] = {{"c2", (*c.chart)[0]}, {"c3", (*c.chart)[1]}, {"c4", (*c.chart)[2]}};
  return j;
}

AffineIem affine_from(const json& j) {
  const CombinatorialData pi = combinatorics_from(j);
  if (!j.contains("lengths") || !j.contains("slopes")) bad("affine map needs 'lengths' and 'slopes'");
  VecD lengths, slopes;
  for (const auto& s : letter_values(j["lengths"], pi, "lengths")) lengths.push_back(number_value(s, "lengths"));
  for (const auto& s : letter_values(j["slopes"], pi, "slopes")) slopes.push_back(number_value(s, "slopes"));
  const bool rescale = j.value("auto_rescale", false);
  return build_affine(pi, lengths, slopes, rescale);
}

json affine_json(const AffineIem& g) {
  json j;
  j["pi"] = combinatorics_json(g.pi);
  json l = json::array(), s = json::array();
  for (int a = 0; a < g.pi.d(); ++a) {
    l.push_back(fixed_decimal(g.lengths[a]));
    s.push_back(fixed_decimal(g.slopes[a]));
  }
  j["lengths"] = l;
  j["slopes"] = s;
  return j;
}

MapSpec map_from(const json& j) {
  if (!j.is_object()) bad("map blocks must be objects");
  MapSpec m;
  if (j.contains("slopes")) {
    m.kind = MapSpec::Kind::Affine;
    m.affine = affine_from(j);
  } else {
    m.giem = giem_from(j);
  }
  return m;
}

}  // namespace

CombinatorialData parse_combinatorics_json(const std::string& text) { return combinatorics_from(parse_text(text)); }
std::string combinatorics_to_json(const CombinatorialData& pi) { return combinatorics_json(pi).dump(); }

CombinatoricsSequence parse_sequence_json(const CombinatorialData& start, const std::string& text) {
  const json j = parse_text(text);
  if (!j.is_array()) bad("sequence must be an array of {\"eps\":0|1}");
  std::vector<int> types;
  for (const auto& s : j) {
    if (!s.is_object() || !s.contains("eps") || !s["eps"].is_number_integer()) bad("sequence entries need integer 'eps'");
    const int e = s["eps"].get<int>();
    if (e != 0 && e != 1) bad("eps must be 0 or 1");
    types.push_back(e);
  }
  return make_sequence(start, types);
}

std::string sequence_to_json(const CombinatoricsSequence& seq) {
  json j = json::array();
  for (const auto& s : seq.steps) j.push_back({{"eps", s.eps}});
  return j.dump();
}

GiemConfig parse_giem_json(const std::string& text) { return giem_from(parse_text(text)); }
std::string giem_config_to_json(const GiemConfig& config) { return giem_json(config).dump(); }
AffineIem parse_affine_json(const std::string& text) { return affine_from(parse_text(text)); }
std::string affine_to_json(const AffineIem& g) { return affine_json(g).dump(); }

std::string matrix_to_json(const IntMatrix& m) {
  json j = json::array();
  for (int i = 0; i < m.size(); ++i) {
    json row = json::array();
    for (int k = 0; k < m.size(); ++k) row.push_back(to_decimal(m(i, k)));
    j.push_back(row);
  }
  return j.dump();
}

double ExperimentConfig::tolerance(const std::string& name, double fallback) const {
  auto it = tolerances.find(name);
  return it == tolerances.end() ? fallback : it->second;
}

ExperimentConfig parse_experiment_json(const std::string& text) {
  const json j = parse_text(text);
  if (!j.is_object()) bad("config must be a JSON object");
  ExperimentConfig c;
  c.canonical = j.dump();
  if (j.contains("maps")) {
    for (const auto& m : j["maps"]) c.maps.push_back(map_from(m));
  } else if (j.contains("f")) {
    c.maps.push_back(map_from(j["f"]));
    if (j.contains("g")) c.maps.push_back(map_from(j["g"]));
  } else {
    c.maps.push_back(map_from(j));
  }
  if (c.maps.empty()) bad("config holds no map");
  auto read_int = [&](const char* key) -> std::optional<long long> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_number_integer()) bad(std::string("'") + key + "' must be an integer");
    return j[key].get<long long>();
  };
  if (auto v = read_int("depth")) {
    if (*v < 0) bad("depth must be nonnegative");
    c.depth = static_cast<std::size_t>(*v);
  }
  if (auto v = read_int("precision_bits")) {
    if (*v < 64) bad("precision_bits must be at least 64");
    c.precision_bits = static_cast<int>(*v);
  }
  if (auto v = read_int("quadrature_nodes")) {
    if (*v < 2) bad("quadrature_nodes must be at least 2");
    c.quadrature_nodes = static_cast<int>(*v);
  }
  if (auto v = read_int("samples")) {
    if (*v < 1) bad("samples must be positive");
    c.samples = static_cast<int>(*v);
  }
  if (auto v = read_int("rng_seed")) c.rng_seed = static_cast<std::uint64_t>(*v);
  if (auto v = read_int("extraction_depth")) {
    if (*v < 1) bad("extraction_depth must be positive");
    c.extraction_depth = static_cast<std::size_t>(*v);
  }
  if (j.contains("tolerances")) {
    for (const auto& [k, v] : j["tolerances"].items()) {
      const double x = number_value(v, k);
      if (!(x > 0)) bad("tolerance '" + k + "' must be positive");
      c.tolerances[k] = x;
    }
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_json(ss.str());
}

std::string config_hash(const std::string& canonical) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const char* version_string() { return "giet 0.1.0"; }

std::string fixed_decimal(double x) {
  if (!std::isfinite(x)) return x != x ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[400];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed);
  return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const Provenance& p, const std::vector<std::string>& columns)
    : out_(path), columns_(columns.size()) {
  if (!out_) throw Error(ErrorKind::InvalidInput, "cannot write " + path.string());
  out_ << "# config_hash: " << p.config_hash << '\n'
       << "# precision_bits: " << p.precision_bits << '\n'
       << "# version: " << p.version << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw Error(ErrorKind::InvalidInput, "CSV row width does not match the header");
  for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
  out_ << '\n';
  ++rows_;
}

}  // namespace giet
