#include "fwgd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <string>
#include <thread>

namespace fwgd {

namespace {

constexpr std::uint64_t kJitterStream = 0x4a49;

Vector concat(const FlatViews& parts) {
  Vector out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Splits rank-ordered payloads into `per` equal pieces each, in order.
FlatViews split(const std::vector<Vector>& payloads, std::size_t pieces_per_rank) {
  FlatViews out;
  for (const Vector& p : payloads) {
    if (pieces_per_rank == 0) continue;
    const std::size_t len = p.size() / pieces_per_rank;
    for (std::size_t k = 0; k < pieces_per_rank; ++k)
      out.push_back(std::span<const double>(p).subspan(k * len, len));
  }
  return out;
}

struct MemberStepStats {
  double loglik = 0.0;
  double repulsion_norm = 0.0;
  std::size_t correct = 0;
};

// Sums per-member statistics of one step in ascending member order, the
// same order feature_wgd_step uses.
StepStats reduce_step(const std::vector<MemberStepStats>& members, std::size_t batch) {
  StepStats s;
  double rep = 0.0;
  for (const MemberStepStats& m : members) {
    s.loglik += m.loglik;
    s.correct += m.correct;
    s.predictions += batch;
    rep += m.repulsion_norm;
  }
  s.repulsion_norm = members.empty() ? 0.0 : rep / static_cast<double>(members.size());
  return s;
}

struct EpochAccumulator {
  double loglik = 0.0;
  double rep = 0.0;
  std::size_t correct = 0;
  std::size_t predictions = 0;
  std::size_t steps = 0;

  void add(const StepStats& s) {
    loglik += s.loglik;
    rep += s.repulsion_norm;
    correct += s.correct;
    predictions += s.predictions;
    ++steps;
  }
  EpochRecord finish(std::size_t epoch, double lr) const {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.mean_loglik = predictions ? loglik / static_cast<double>(predictions) : 0.0;
    rec.repulsion_norm = steps ? rep / static_cast<double>(steps) : 0.0;
    rec.accuracy = predictions ? static_cast<double>(correct) / static_cast<double>(predictions) : 0.0;
    return rec;
  }
};

void require_feature_space(const TrainConfig& cfg) {
  if (cfg.space != InferenceSpace::feature)
    throw std::invalid_argument("parallel execution implements feature-space inference only");
}

}  // namespace

WorkerGroup::WorkerGroup(std::size_t workers, std::chrono::milliseconds timeout)
    : workers_(workers), timeout_(timeout), slots_(workers) {
  if (workers == 0) throw std::invalid_argument("WorkerGroup: need at least one worker");
}

std::vector<Vector> WorkerGroup::allgather(std::size_t rank, Round round, Vector payload) {
  std::unique_lock lock(mu_);
  if (failed_) throw ExchangeError("allgather: group already failed");
  if (rank >= workers_) throw ExchangeError("allgather: rank out of range");
  const auto expected = static_cast<Round>(completed_ % kRoundsPerStep);
  if (round != expected) {
    failed_ = true;
    cv_.notify_all();
    throw ExchangeError("allgather: rank " + std::to_string(rank) + " entered round " +
                        std::to_string(static_cast<std::size_t>(round)) + " while round " +
                        std::to_string(static_cast<std::size_t>(expected)) + " is open");
  }
  if (slots_[rank].has_value()) {
    failed_ = true;
    cv_.notify_all();
    throw ExchangeError("allgather: rank " + std::to_string(rank) + " contributed twice");
  }
  slots_[rank] = std::move(payload);
  ++arrived_;

  if (arrived_ == workers_) {
    result_.clear();
    std::size_t bytes = 0;
    for (auto& s : slots_) {
      bytes += s->size() * sizeof(double);
      result_.push_back(std::move(*s));
      s.reset();
    }
    traffic_.push_back({round, bytes});
    arrived_ = 0;
    ++completed_;
    ++generation_;
    cv_.notify_all();
    return result_;
  }

  const std::size_t gen = generation_;
  const bool done = cv_.wait_for(lock, timeout_, [&] { return generation_ != gen || failed_; });
  if (!done) {
    failed_ = true;
    cv_.notify_all();
    throw ExchangeError("allgather: timed out waiting for " +
                        std::to_string(workers_ - arrived_) + " worker(s) in round " +
                        std::to_string(static_cast<std::size_t>(round)));
  }
  if (generation_ == gen) throw ExchangeError("allgather: group failed");
  // The next round cannot complete without this worker, so result_ still
  // holds this round's payloads.
  return result_;
}

void WorkerGroup::abort() {
  std::lock_guard lock(mu_);
  failed_ = true;
  cv_.notify_all();
}

std::vector<RoundTraffic> WorkerGroup::traffic() const {
  std::lock_guard lock(mu_);
  return traffic_;
}

std::size_t expected_step_bytes(std::size_t n, std::size_t batch, std::size_t width, std::size_t k,
                                std::size_t head_params) {
  return n * (batch * width + k + head_params) * sizeof(double);
}

ParallelResult run_sequential(const TrainConfig& cfg, const Matrix& x, std::span<const int> y,
                              std::size_t num_classes, std::optional<std::size_t> max_steps) {
  require_feature_space(cfg);
  cfg.validate();
  ParallelResult out;
  out.ensemble = init_ensemble(cfg, x.cols(), num_classes);
  OptimizerState opt = OptimizerState::zeros_like(out.ensemble);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (max_steps && out.steps >= *max_steps) break;
    const double lr = lr_at(cfg, epoch);
    EpochAccumulator acc;
    for (const auto& idx : epoch_batches(x.rows(), cfg.batch_size, cfg.seed, epoch)) {
      if (max_steps && out.steps >= *max_steps) break;
      const Matrix bx = gather_rows(x, idx);
      const std::vector<int> by = gather(y, idx);
      acc.add(feature_wgd_step(out.ensemble, Batch{bx, by}, cfg, opt, lr));
      ++out.steps;
    }
    out.log.push_back(acc.finish(epoch, lr));
  }
  return out;
}

ParallelResult run_parallel(const TrainConfig& cfg, const Matrix& x, std::span<const int> y,
                            std::size_t num_classes, std::size_t workers,
                            const ParallelOptions& options) {
  require_feature_space(cfg);
  cfg.validate();
  const std::size_t n = cfg.ensemble_size;
  if (workers == 0 || n % workers != 0)
    throw std::invalid_argument("run_parallel: ensemble size " + std::to_string(n) +
                                " is not divisible by worker count " + std::to_string(workers));
  const std::size_t per = n / workers;

  const Ensemble initial = init_ensemble(cfg, x.cols(), num_classes);
  const std::vector<Vector> init_velocity = OptimizerState::zeros_like(initial).particle_velocity;

  // Batch schedule shared by all workers.
  struct Step {
    std::size_t epoch;
    double lr;
    Matrix x;
    std::vector<int> y;
  };
  std::vector<Step> schedule;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : epoch_batches(x.rows(), cfg.batch_size, cfg.seed, epoch)) {
      if (options.max_steps && schedule.size() >= *options.max_steps) break;
      schedule.push_back({epoch, lr_at(cfg, epoch), gather_rows(x, idx), gather(y, idx)});
    }
  }

  // Results written by workers at disjoint indices.
  std::vector<Particle> final_particles(initial.particles);
  std::vector<Classifier> final_heads(workers);
  std::vector<std::vector<MemberStepStats>> member_stats(schedule.size(),
                                                         std::vector<MemberStepStats>(n));
  std::vector<std::exception_ptr> errors(workers);
  WorkerGroup group(workers);

  auto worker = [&](std::size_t rank) {
    try {
      const std::size_t first = rank * per;
      std::vector<Particle> mine(initial.particles.begin() + static_cast<long>(first),
                                 initial.particles.begin() + static_cast<long>(first + per));
      std::vector<Vector> velocity(init_velocity.begin() + static_cast<long>(first),
                                   init_velocity.begin() + static_cast<long>(first + per));
      Classifier head = initial.heads[0];
      Vector head_velocity(head.parameter_count(), 0.0);
      Rng jitter(options.jitter_seed, kJitterStream, rank);
      auto maybe_sleep = [&] {
        if (options.jitter_seed != 0)
          std::this_thread::sleep_for(std::chrono::microseconds(jitter.below(200)));
      };

      for (std::size_t s = 0; s < schedule.size(); ++s) {
        const Step& step = schedule[s];
        const Batch batch{step.x, step.y};
        const std::size_t b = batch.size();

        std::vector<FeatureLocal> local;
        for (std::size_t i = 0; i < per; ++i) local.push_back(feature_local_pass(mine[i], head, batch, cfg));
        FlatViews own_feats, own_grads;
        for (const FeatureLocal& l : local) {
          own_feats.push_back(l.features().flat());
          own_grads.push_back(l.lik.g_feat.flat());
        }

        maybe_sleep();
        const std::vector<Vector> grad_payloads =
            group.allgather(rank, Round::data_gradients, concat(own_grads));
        const FlatViews all_grads = split(grad_payloads, per);

        ProjectionBasis basis;
        const bool repel = cfg.repulsion;
        const bool project = cfg.uses_projection();
        if (repel && project) basis = build_basis(all_grads, cfg.projection_dim);

        // Projected coordinates when projecting, whole features otherwise.
        Vector own_payload;
        if (repel && project && basis.effective_k() > 0) {
          own_payload = project_all(basis, own_feats).data();
        } else if (repel && !project) {
          own_payload = concat(own_feats);
        }
        maybe_sleep();
        const std::vector<Vector> z_payloads =
            group.allgather(rank, Round::projected_features, std::move(own_payload));

        Matrix own_rep(per, b * cfg.feature_dim);
        if (repel && (!project || basis.effective_k() > 0)) {
          const std::size_t k = project ? basis.effective_k() : b * cfg.feature_dim;
          Matrix z(n, k);
          for (std::size_t r = 0; r < workers; ++r)
            std::copy(z_payloads[r].begin(), z_payloads[r].end(), z.row(r * per).begin());
          const Matrix rz = kde_repulsion_all(z, bandwidth(cfg.kernel, z));
          for (std::size_t i = 0; i < per; ++i) {
            if (project) {
              const Vector r = lift(basis, rz.row(first + i));
              std::copy(r.begin(), r.end(), own_rep.row(i).begin());
            } else {
              std::copy(rz.row(first + i).begin(), rz.row(first + i).end(), own_rep.row(i).begin());
            }
          }
        }

        Vector head_payload;
        for (std::size_t i = 0; i < per; ++i) {
          const Vector v = feature_member_direction(mine[i], local[i], own_rep.row(i), cfg, b);
          apply_update(cfg.optimizer, mine[i].params(), velocity[i], v, step.lr, cfg.momentum);
          const Vector vh = member_head_direction(local[i].lik.g_theta, head, b, cfg.weight_decay);
          head_payload.insert(head_payload.end(), vh.begin(), vh.end());
          member_stats[s][first + i] = {local[i].lik.loglik, norm(own_rep.row(i)),
                                        count_correct(local[i].lik.g_logit, batch.y)};
        }

        maybe_sleep();
        const std::vector<Vector> head_payloads =
            group.allgather(rank, Round::head_directions, std::move(head_payload));
        std::vector<Vector> head_dirs;
        for (const auto& view : split(head_payloads, per)) head_dirs.emplace_back(view.begin(), view.end());
        apply_update(cfg.optimizer, head.params(), head_velocity, mean_direction(head_dirs), step.lr,
                     cfg.momentum);
        bool finite = std::all_of(head.params().begin(), head.params().end(),
                                  [](double v) { return std::isfinite(v); });
        for (const Particle& p : mine)
          finite = finite && std::all_of(p.params().begin(), p.params().end(),
                                         [](double v) { return std::isfinite(v); });
        if (!finite) throw TrainingDiverged(s, "non-finite parameters after step " + std::to_string(s));
      }
      for (std::size_t i = 0; i < per; ++i) final_particles[first + i] = std::move(mine[i]);
      final_heads[rank] = std::move(head);
    } catch (...) {
      errors[rank] = std::current_exception();
      group.abort();
    }
  };

  {
    std::vector<std::jthread> threads;
    for (std::size_t r = 0; r < workers; ++r) threads.emplace_back(worker, r);
  }
  // Report the root cause rather than the follow-on aborts of other ranks.
  for (const auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const ExchangeError&) {
      continue;
    } catch (...) {
      throw;
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t r = 1; r < workers; ++r)
    if (final_heads[r].params() != final_heads[0].params())
      throw std::logic_error("run_parallel: classifier replicas diverged");

  ParallelResult out;
  out.ensemble.particles = std::move(final_particles);
  out.ensemble.heads = {final_heads[0]};
  out.steps = schedule.size();

  std::optional<std::size_t> current_epoch;
  EpochAccumulator acc;
  double lr = 0.0;
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    if (current_epoch && *current_epoch != schedule[s].epoch) {
      out.log.push_back(acc.finish(*current_epoch, lr));
      acc = {};
    }
    current_epoch = schedule[s].epoch;
    lr = schedule[s].lr;
    acc.add(reduce_step(member_stats[s], schedule[s].x.rows()));
  }
  if (current_epoch) out.log.push_back(acc.finish(*current_epoch, lr));

  const std::vector<RoundTraffic> traffic = group.traffic();
  out.comm.steps = schedule.size();
  for (std::size_t r = 0; r < std::min(kRoundsPerStep, traffic.size()); ++r) {
    out.comm.round_bytes.push_back(traffic[r].bytes);
    out.comm.bytes_per_step += traffic[r].bytes;
  }
  for (const RoundTraffic& t : traffic) out.comm.total_bytes += t.bytes;
  return out;
}

}  // namespace fwgd
