#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sbikit/common.hpp"
#include "sbikit/distributions.hpp"

namespace sbikit {

/// Forward model. The callable must be pure given the per-row seeds and
/// safe to invoke concurrently on disjoint row blocks. Failed rows are
/// signaled with NaN/Inf entries in the output.
struct Simulator {
  std::string name;
  int theta_dim = 0;
  int x_dim = 0;
  std::function<MatrixXd(const MatrixXd& thetas,
                         const std::vector<std::uint64_t>& row_seeds)>
      fn;
};

/// Paired (theta, x) rows with a per-row validity mask. valid[i] is false
/// iff row i of theta or x contains a NaN/Inf entry.
struct SimulationBatch {
  MatrixXd theta;
  MatrixXd x;
  std::vector<std::uint8_t> valid;
  std::uint64_t seed = 0;
  std::string provenance;

  int n() const { return static_cast<int>(theta.rows()); }
  int theta_dim() const { return static_cast<int>(theta.cols()); }
  int x_dim() const { return static_cast<int>(x.cols()); }
  int valid_count() const;

  static SimulationBatch empty(int theta_dim, int x_dim);
};

/// Draws n parameters from the prior and runs the simulator over them with
/// up to `workers` concurrent workers. Row i is seeded with
/// derive_seed(seed, "row", i), so the result is identical for any worker
/// count. A chunk whose simulator call throws is marked invalid and the
/// error is recorded in the batch provenance; if every row ends up invalid
/// the call fails.
SimulationBatch simulate_for_sbi(const Distribution& prior, const Simulator& sim,
                                 int n, int workers, std::uint64_t seed);

/// Runs the simulator over caller-provided parameters (same seeding and
/// worker semantics as simulate_for_sbi).
SimulationBatch simulate_at(const MatrixXd& thetas, const Simulator& sim,
                            int workers, std::uint64_t seed);

/// Keeps exactly the valid rows. If dropped is non-null it receives the
/// number of removed rows; the count is also appended to the provenance.
/// Fails when no valid rows remain.
SimulationBatch filter_valid(const SimulationBatch& b, int* dropped = nullptr);

/// Row-wise concatenation, a's rows first.
SimulationBatch append(const SimulationBatch& a, const SimulationBatch& b);

// Batch persistence: a JSON header plus a CSV with columns
// theta_0..theta_{d-1}, x_0..x_{k-1}, valid. Floats use 17 significant
// digits so the round trip is lossless.
void save_batch(const SimulationBatch& b, const std::string& csv_path,
                const std::string& json_path);
SimulationBatch load_batch(const std::string& csv_path,
                           const std::string& json_path);

/// Parses an externally produced CSV (same column layout, header row
/// required, trailing `valid` column optional). The validity mask is
/// recomputed from finiteness. Parse errors cite the physical line number.
SimulationBatch import_batch_csv(const std::string& csv_path, int theta_dim,
                                 int x_dim);

}  // namespace sbikit
