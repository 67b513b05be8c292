#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "simgap/dataset.hpp"
#include "simgap/digest.hpp"
#include "simgap/error.hpp"
#include "simgap/external_simulator.hpp"

namespace simgap {
namespace {

namespace fs = std::filesystem;

SystemSpec small_spec() {
  SystemSpec s;
  s.state_dim = 2;
  s.input_dim = 1;
  s.tau = 0.1;
  s.state_box = {{0, 1}, {0, 2}};
  s.input_grid = {{-1}, {0}, {1}};
  return s;
}

NominalModel small_model() { return NominalModel::pendulum(small_spec()); }

// Two centers (epsilon large enough for one per axis on x1 and two on x2).
Cover two_centers() {
  Cover c = build_cover({{0, 1}, {0, 2}}, 0.75);
  EXPECT_EQ(c.size(), 2u);
  return c;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "simgap_test_dataset";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Collect, CountsAndProvenance) {
  const auto model = small_model();
  SyntheticSimulator sim(model, {}, NoiseModel{NoiseLaw::gaussian, {0.1, 0.1}});
  const Dataset ds = collect_dataset(model, sim, two_centers(), 5, 77);
  ASSERT_EQ(ds.records.size(), 6u);
  std::size_t rows = 0;
  for (const auto& rec : ds.records) {
    rows += rec.seeds.size();
    EXPECT_EQ(rec.replicates.size(), 5u * 2);
    for (std::size_t k = 0; k < 5; ++k)
      EXPECT_EQ(rec.seeds[k], replicate_seed(77, rec.r, rec.j, k));
  }
  EXPECT_EQ(rows, 30u);
  EXPECT_NO_THROW(ds.check());
}

TEST(Collect, NoiselessReplicatesEqualNominal) {
  const auto model = small_model();
  SyntheticSimulator sim(model, {}, NoiseModel{NoiseLaw::gaussian, {0, 0}});
  const Dataset ds = collect_dataset(model, sim, two_centers(), 4, 1);
  for (const auto& rec : ds.records)
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t i = 0; i < 2; ++i)
        EXPECT_EQ(rec.replicate(k, i, 2), rec.nominal[i]);
}

TEST(Collect, SeedDeterminismAcrossWorkerCounts) {
  const auto model = small_model();
  SyntheticSimulator sim(model, {BiasTerm::constant(0.01), {}},
                         NoiseModel{NoiseLaw::gaussian, {0.1, 0.1}});
  const Cover c = build_cover({{0, 1}, {0, 2}}, 0.2);
  const Dataset a = collect_dataset(model, sim, c, 3, 9);
  CollectOptions opt;
  opt.workers = 3;
  const Dataset b = collect_dataset(model, sim, c, 3, 9, opt);
  EXPECT_EQ(serialize_dataset(a), serialize_dataset(b));
  const Dataset other = collect_dataset(model, sim, c, 3, 10);
  EXPECT_NE(serialize_dataset(a), serialize_dataset(other));
}

TEST(Serialization, RoundTripWithIdenticalDigest) {
  const auto model = small_model();
  SyntheticSimulator sim(model, {}, NoiseModel{NoiseLaw::gaussian, {0.1, 0.1}});
  const Dataset ds = collect_dataset(model, sim, two_centers(), 5, 77);
  const fs::path p = temp_path("roundtrip.sgd");
  save_dataset(ds, p);
  const Dataset back = load_dataset(p);
  EXPECT_EQ(back.records, ds.records);
  EXPECT_EQ(back.n_hat_1, ds.n_hat_1);
  EXPECT_EQ(back.master_seed, ds.master_seed);
  EXPECT_EQ(back.cover.centers, ds.cover.centers);
  EXPECT_EQ(back.spec.input_grid, ds.spec.input_grid);
  EXPECT_EQ(sha256_hex(serialize_dataset(back)), sha256_hex(serialize_dataset(ds)));
  EXPECT_EQ(sha256_file(p), sha256_hex(serialize_dataset(ds)));
}

TEST(Serialization, MissingReplicateRowNamesRecord) {
  const auto model = small_model();
  SyntheticSimulator sim(model, {}, NoiseModel{NoiseLaw::gaussian, {0.1, 0.1}});
  Dataset ds = collect_dataset(model, sim, two_centers(), 5, 77);
  ds.records[4].replicates.resize(4 * 2);
  ds.records[4].seeds.resize(4);
  try {
    ds.check();
    FAIL() << "expected CorruptDataset";
  } catch (const CorruptDataset& e) {
    EXPECT_NE(std::string(e.what()).find("record (r=1, j=1)"), std::string::npos) << e.what();
  }
  // The same defect in the serialized bytes is caught on load.
  const std::string bytes = serialize_dataset(ds);
  EXPECT_THROW(deserialize_dataset(bytes), CorruptDataset);
}

TEST(Serialization, CorruptionIsDetected) {
  const auto model = small_model();
  SyntheticSimulator sim(model, {}, NoiseModel{NoiseLaw::gaussian, {0.1, 0.1}});
  const std::string bytes =
      serialize_dataset(collect_dataset(model, sim, two_centers(), 5, 77));
  EXPECT_THROW(deserialize_dataset(bytes.substr(0, bytes.size() - 40)), CorruptDataset);
  EXPECT_THROW(deserialize_dataset("garbage"), CorruptDataset);
  EXPECT_THROW(deserialize_dataset(bytes + "x"), CorruptDataset);
  EXPECT_THROW(load_dataset(temp_path("does_not_exist.sgd")), MissingArtifact);
}

TEST(Digest, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

SystemSpec fake_spec() {
  SystemSpec s;
  s.state_dim = 2;
  s.input_dim = 1;
  s.tau = 0.1;
  s.state_box = {{0, 1}, {0, 1}};
  s.input_grid = {{-1}, {1}};
  return s;
}

ExternalOptions fake(std::vector<std::string> extra, int timeout_ms = 5000) {
  ExternalOptions o;
  o.command = {SIMGAP_FAKE_SIM, "2", "1"};
  o.command.insert(o.command.end(), extra.begin(), extra.end());
  o.timeout = std::chrono::milliseconds(timeout_ms);
  return o;
}

TEST(ExternalSimulator, SpeaksTheProtocol) {
  ExternalSimulator sim(fake_spec(), fake({}));
  EXPECT_TRUE(sim.supports_common_random_numbers());
  const Vec a = sim.step(Vec{0.5, 0.5}, Vec{1}, 3);
  EXPECT_NEAR(a[0], 0.61, 1e-3);
  EXPECT_EQ(a, sim.step(Vec{0.5, 0.5}, Vec{1}, 3));
  auto other = sim.clone();
  EXPECT_EQ(other->step(Vec{0.5, 0.5}, Vec{1}, 3), a);
}

TEST(ExternalSimulator, DimensionMismatchIsRejected) {
  SystemSpec s = fake_spec();
  s.state_dim = 3;
  s.state_box.push_back({0, 1});
  EXPECT_THROW(ExternalSimulator(s, fake({})), SimulatorIoError);
}

TEST(ExternalSimulator, ErrorReplyCarriesPayloadAndLocation) {
  const auto model = NominalModel::affine(fake_spec(), {1, 0, 0, 1}, {0.1, 0.1}, {0, 0});
  ExternalSimulator sim(fake_spec(), fake({"error", "5"}));
  const Cover c = build_cover({{0, 1}, {0, 1}}, 0.3);
  const fs::path ck = temp_path("partial.sgd");
  fs::remove(ck);
  CollectOptions opt;
  opt.checkpoint = ck;
  try {
    collect_dataset(model, sim, c, 2, 1, opt);
    FAIL() << "expected SimulatorIoError";
  } catch (const SimulatorIoError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("(r=1, j=0, k=1)"), std::string::npos) << what;
    EXPECT_NE(e.payload().find("physics engine diverged"), std::string::npos);
  }
  // Five good steps complete two records of two replicates each.
  const Dataset partial = load_dataset(ck);
  EXPECT_FALSE(partial.complete);
  EXPECT_EQ(partial.records.size(), 2u);

  // Resuming with a healthy simulator finishes the canonical campaign.
  ExternalSimulator healthy(fake_spec(), fake({}));
  CollectOptions resume;
  resume.resume = &partial;
  const Dataset done = collect_dataset(model, healthy, c, 2, 1, resume);
  const Dataset fresh = collect_dataset(model, healthy, c, 2, 1);
  EXPECT_EQ(serialize_dataset(done), serialize_dataset(fresh));
}

TEST(ExternalSimulator, MalformedReply) {
  ExternalSimulator sim(fake_spec(), fake({"malformed", "0"}));
  try {
    sim.step(Vec{0, 0}, Vec{1}, 0);
    FAIL();
  } catch (const SimulatorIoError& e) {
    EXPECT_EQ(e.payload(), "{not json");
  }
}

TEST(ExternalSimulator, HangTimesOut) {
  ExternalSimulator sim(fake_spec(), fake({"hang", "0"}, 200));
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(sim.step(Vec{0, 0}, Vec{1}, 0), SimulatorIoError);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(5));
}

TEST(ExternalSimulator, ChildExit) {
  ExternalSimulator sim(fake_spec(), fake({"exit", "1"}));
  EXPECT_NO_THROW(sim.step(Vec{0, 0}, Vec{1}, 0));
  EXPECT_THROW(sim.step(Vec{0, 0}, Vec{1}, 1), SimulatorIoError);
}

}  // namespace
}  // namespace simgap
