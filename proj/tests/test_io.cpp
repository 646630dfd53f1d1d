#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "fixtures.hpp"
#include "giet/io.hpp"

using namespace giet;
using namespace fixtures;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void expect_invalid(const std::function<void()>& f) {
  try {
    f();
    FAIL() << "expected invalid input";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput) << e.what();
  }
}

}  // namespace

TEST(Io, CombinatoricsRoundTrip) {
  for (const auto& pi : rauzy_class(symmetric_pi())) EXPECT_EQ(parse_combinatorics_json(combinatorics_to_json(pi)), pi);
}

TEST(Io, SequenceRoundTrip) {
  const auto seq = seed_loop();
  const auto back = parse_sequence_json(seq.pi_at(0), sequence_to_json(seq));
  EXPECT_EQ(back.types(), seq.types());
  EXPECT_EQ(back.pi_at(back.size()), seq.pi_at(seq.size()));
}

TEST(Io, GiemConfigRoundTrip) {
  GiemConfig c = charted_config("0.1", "0.2", "0");
  c.branches = {BranchSpec{"moebius", {{"a", "1.3"}}}, BranchSpec{}, BranchSpec{}};
  const GiemConfig back = parse_giem_json(giem_config_to_json(c));
  EXPECT_EQ(back.pi, c.pi);
  EXPECT_EQ(back.domain_lengths, c.domain_lengths);
  EXPECT_EQ(back.image_lengths, c.image_lengths);
  EXPECT_EQ(back.chart, c.chart);
  ASSERT_EQ(back.branches.size(), 3u);
  EXPECT_EQ(back.branches[0].family, "moebius");
  EXPECT_EQ(back.branches[0].params, c.branches[0].params);
}

TEST(Io, AffineRoundTripIsExact) {
  const AffineIem& g = seed_model();
  const AffineIem back = parse_affine_json(affine_to_json(g));
  EXPECT_EQ(back.pi, g.pi);
  EXPECT_EQ(back.lengths, g.lengths);
  EXPECT_EQ(back.slopes, g.slopes);
  EXPECT_EQ(back.translations, g.translations);
}

TEST(Io, MalformedInputIsRejected) {
  expect_invalid([] { parse_combinatorics_json("{"); });
  expect_invalid([] { parse_combinatorics_json(R"({"alphabet":["A","B"],"pi0":{"A":1,"B":1},"pi1":{"A":2,"B":1}})"); });
  expect_invalid([] { parse_combinatorics_json(R"({"alphabet":["A","B"],"pi0":{"A":1,"B":2}})"); });
  expect_invalid([] { parse_sequence_json(golden_pi(), R"([{"eps":2}])"); });
  expect_invalid([] { parse_sequence_json(golden_pi(), R"({"eps":0})"); });
  expect_invalid([] {
    parse_giem_json(R"({"alphabet":["A","B"],"pi0":{"A":1,"B":2},"pi1":{"A":2,"B":1},"domain_lengths":["0.5"]})");
  });
  expect_invalid([] {
    parse_giem_json(R"({"alphabet":["A","B"],"pi0":{"A":1,"B":2},"pi1":{"A":2,"B":1},"domain_lengths":["x","0.5"]})");
  });
}

TEST(Io, ExperimentLayouts) {
  const std::string g = giem_config_to_json(golden_config());
  const ExperimentConfig single = parse_experiment_json(g);
  EXPECT_EQ(single.maps.size(), 1u);
  const ExperimentConfig pair = parse_experiment_json(R"({"f":)" + g + R"(,"g":)" + g + R"(,"depth":12,"samples":9})");
  EXPECT_EQ(pair.maps.size(), 2u);
  EXPECT_EQ(pair.depth, 12u);
  EXPECT_EQ(pair.samples, 9);
  const ExperimentConfig aff = parse_experiment_json(R"({"maps":[)" + affine_to_json(seed_model()) + "]}");
  ASSERT_EQ(aff.maps.size(), 1u);
  EXPECT_EQ(aff.maps[0].kind, MapSpec::Kind::Affine);
}

TEST(Io, ExperimentRejectsBadParameters) {
  const std::string g = giem_config_to_json(golden_config());
  const auto with = [&](const std::string& extra) { return R"({"maps":[)" + g + "]," + extra + "}"; };
  expect_invalid([&] { parse_experiment_json(with(R"("tolerances":{"psi":0})")); });
  expect_invalid([&] { parse_experiment_json(with(R"("tolerances":{"psi":-1e-3})")); });
  expect_invalid([&] { parse_experiment_json(with(R"("depth":-1)")); });
  expect_invalid([&] { parse_experiment_json(with(R"("extraction_depth":0)")); });
  const ExperimentConfig ok = parse_experiment_json(with(R"("tolerances":{"psi":1e-6},"depth":0)"));
  EXPECT_EQ(ok.tolerance("psi", 1), 1e-6);
  EXPECT_EQ(ok.tolerance("other", 2), 2);
  EXPECT_EQ(ok.depth, 0u);
}

TEST(Io, ConfigHashIsDeterministic) {
  EXPECT_EQ(config_hash("abc"), config_hash("abc"));
  EXPECT_NE(config_hash("abc"), config_hash("abd"));
  EXPECT_EQ(config_hash("abc").size(), 16u);
  // FNV-1a of the empty string is the offset basis
  EXPECT_EQ(config_hash(""), "cbf29ce484222325");
}

TEST(Io, FixedDecimalHasNoExponent) {
  for (double x : {1e-30, 6.02e23, -0.5, 0.0, 1.0 / 3}) {
    const std::string s = fixed_decimal(x);
    EXPECT_EQ(s.find_first_of("eE"), std::string::npos) << s;
    EXPECT_EQ(std::stod(s), x);
  }
}

TEST(Io, CsvWriterWritesProvenanceAndChecksWidth) {
  const auto path = std::filesystem::temp_directory_path() / "giet_io_test.csv";
  {
    CsvWriter w(path, {"00ff", 256, "v1"}, {"a", "b"});
    w.row({"1", "2"});
    EXPECT_THROW(w.row({"1"}), Error);
    EXPECT_EQ(w.rows(), 1u);
  }
  EXPECT_EQ(slurp(path), "# config_hash: 00ff\n# precision_bits: 256\n# version: v1\na,b\n1,2\n");
  std::filesystem::remove(path);
}
