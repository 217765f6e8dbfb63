#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fwgd/engine.hpp"

namespace fwgd {

/// Exchange rounds of one feature-space step, in the order they must occur.
enum class Round : std::size_t { data_gradients = 0, projected_features = 1, head_directions = 2 };
inline constexpr std::size_t kRoundsPerStep = 3;

class ExchangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RoundTraffic {
  Round round = Round::data_gradients;
  std::size_t bytes = 0;  ///< sum of all contributed payloads
};

/// Simulated process group. Each worker thread calls allgather() once per
/// round with its rank; the call blocks until every rank has contributed and
/// returns all payloads ordered by rank.
class WorkerGroup {
 public:
  explicit WorkerGroup(std::size_t workers,
                       std::chrono::milliseconds timeout = std::chrono::milliseconds(20000));

  std::size_t size() const { return workers_; }

  std::vector<Vector> allgather(std::size_t rank, Round round, Vector payload);
  /// Wakes every waiter with an error; used when a worker fails.
  void abort();

  /// Completed rounds in order.
  std::vector<RoundTraffic> traffic() const;

 private:
  std::size_t workers_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::optional<Vector>> slots_;
  std::size_t arrived_ = 0;
  std::size_t generation_ = 0;
  std::size_t completed_ = 0;
  bool failed_ = false;
  std::vector<Vector> result_;
  std::vector<RoundTraffic> traffic_;
};

struct CommReport {
  std::size_t steps = 0;
  std::size_t rounds_per_step = kRoundsPerStep;
  std::vector<std::size_t> round_bytes;  ///< per round of the first step
  std::size_t bytes_per_step = 0;        ///< first step; constant for full batches
  std::size_t total_bytes = 0;
};

/// Closed-form bytes exchanged in one step with n members, batch B, feature
/// width H, k projected coordinates and a head with `head_params` entries.
std::size_t expected_step_bytes(std::size_t n, std::size_t batch, std::size_t width, std::size_t k,
                                std::size_t head_params);

struct ParallelOptions {
  /// Non-zero: workers sleep a pseudo-random few microseconds before each
  /// exchange to perturb the schedule.
  std::uint64_t jitter_seed = 0;
  std::optional<std::size_t> max_steps;
};

struct ParallelResult {
  Ensemble ensemble;
  std::vector<EpochRecord> log;
  CommReport comm;
  std::size_t steps = 0;
};

/// Feature-space training with the members sharded over `workers` threads.
/// Produces the same parameters as Trainer::fit for the same config.
ParallelResult run_parallel(const TrainConfig& cfg, const Matrix& x, std::span<const int> y,
                            std::size_t num_classes, std::size_t workers,
                            const ParallelOptions& options = {});

/// Sequential reference with the same step cap as run_parallel.
ParallelResult run_sequential(const TrainConfig& cfg, const Matrix& x, std::span<const int> y,
                              std::size_t num_classes, std::optional<std::size_t> max_steps = {});

}  // namespace fwgd
