#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simgap/cover.hpp"
#include "simgap/systems.hpp"

namespace simgap {

/// Samples for one (center r, input j) pair: the nominal successor and
/// n_hat_1 simulator replicates stored row-major (n_hat_1 x n).
struct DatasetRecord {
  std::size_t r = 0;
  std::size_t j = 0;
  Vec nominal;
  Vec replicates;
  std::vector<std::uint64_t> seeds;

  double replicate(std::size_t k, std::size_t i, std::size_t n) const {
    return replicates[k * n + i];
  }
  bool operator==(const DatasetRecord&) const = default;
};

/// The N x M x n_hat_1 sample campaign. Records are ordered r-major.
struct Dataset {
  SystemSpec spec;
  Cover cover;
  std::size_t n_hat_1 = 0;
  std::uint64_t master_seed = 0;
  std::string simulator;
  /// False for a campaign interrupted by a simulator failure; `records` then
  /// holds the completed canonical prefix and collection can resume from it.
  bool complete = true;
  std::vector<DatasetRecord> records;

  std::size_t expected_records() const {
    return cover.size() * spec.input_count();
  }
  const DatasetRecord& at(std::size_t r, std::size_t j) const {
    return records[r * spec.input_count() + j];
  }
  /// Per-record empirical mean of the replicates.
  Vec empirical_mean(const DatasetRecord& rec) const;

  /// Structural checks (counts, provenance, finiteness); throws
  /// CorruptDataset naming the first offending record.
  void check() const;
};

/// Seed of replicate k at record (r, j).
std::uint64_t replicate_seed(std::uint64_t master, std::size_t r,
                             std::size_t j, std::size_t k);

struct CollectOptions {
  std::size_t workers = 1;
  /// Where to persist a partial dataset if the simulator fails mid-campaign.
  std::optional<std::filesystem::path> checkpoint;
  /// Completed prefix of an earlier interrupted run with the same header.
  const Dataset* resume = nullptr;
};

/// Runs the campaign. A simulator failure is rethrown as SimulatorIoError
/// with the (r, j, k) location prefixed to its message.
Dataset collect_dataset(const NominalModel& model, const Simulator& sim,
                        const Cover& cover, std::size_t n_hat_1,
                        std::uint64_t master_seed,
                        const CollectOptions& options = {});

/// Canonical byte serialization: a text header followed by a little-endian
/// binary body (bit-exact doubles) and an end marker.
std::string serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(const std::string& bytes);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Inspection export: r, j, k (k = -1 on the nominal row), x_r, u, x_next.
void export_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

inline constexpr const char* kDatasetMagic = "SIMGAP-DATASET";
inline constexpr int kDatasetVersion = 1;

}  // namespace simgap
