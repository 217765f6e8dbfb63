#include "fwgd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fwgd {

namespace {

constexpr std::uint64_t kBatchStream = 0x4241;  // "BA"
constexpr std::uint64_t kGaussianStream = 0x4741;

void require_batch(const Batch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("empty mini-batch");
  if (batch.y.size() != batch.size()) throw std::invalid_argument("batch labels and inputs differ in length");
}

FlatViews flat_views(const std::vector<Matrix>& ms) {
  FlatViews v;
  v.reserve(ms.size());
  for (const Matrix& m : ms) v.push_back(m.flat());
  return v;
}

FlatViews flat_views(const std::vector<Vector>& vs) {
  FlatViews v;
  v.reserve(vs.size());
  for (const Vector& x : vs) v.push_back(x);
  return v;
}

Vector scaled_prior(const TrainConfig& cfg, std::span<const double> v) {
  Vector g = prior_logp_grad(cfg.prior, v);
  if (cfg.prior_grad_scale != 1.0)
    for (double& x : g) x *= cfg.prior_grad_scale;
  return g;
}

// Repulsion for every particle in an inferred space of dimension D. When
// projecting, the basis comes from the data gradients.
struct SpaceRepulsion {
  Matrix rows;  // n × D
  std::size_t effective_k = 0;
};

SpaceRepulsion space_repulsion(const FlatViews& points, const FlatViews& grads, bool project,
                               const TrainConfig& cfg) {
  const std::size_t n = points.size();
  const std::size_t d = points.front().size();
  SpaceRepulsion out{Matrix(n, d), 0};
  if (!cfg.repulsion) return out;
  if (project) {
    const ProjectionBasis basis = build_basis(grads, cfg.projection_dim);
    out.effective_k = basis.effective_k();
    if (basis.effective_k() == 0) return out;
    const Matrix z = project_all(basis, points);
    const Matrix rz = kde_repulsion_all(z, bandwidth(cfg.kernel, z));
    for (std::size_t i = 0; i < n; ++i) {
      const Vector r = lift(basis, rz.row(i));
      std::copy(r.begin(), r.end(), out.rows.row(i).begin());
    }
    return out;
  }
  Matrix stacked(n, d);
  for (std::size_t i = 0; i < n; ++i) std::copy(points[i].begin(), points[i].end(), stacked.row(i).begin());
  out.rows = kde_repulsion_all(stacked, bandwidth(cfg.kernel, stacked));
  out.effective_k = d;
  return out;
}

double mean_row_norm(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += norm(m.row(i));
  return s / static_cast<double>(m.rows());
}

void require_per_member_heads(const Ensemble& e, const char* what) {
  if (e.heads.size() != e.particles.size())
    throw std::invalid_argument(std::string(what) + " needs one classifier per member");
}

}  // namespace

std::string to_string(InferenceSpace s) {
  switch (s) {
    case InferenceSpace::feature: return "feature";
    case InferenceSpace::weight: return "weight";
    case InferenceSpace::function: return "function";
    case InferenceSpace::deep_ensembles: return "none";
  }
  return "?";
}

InferenceSpace parse_inference_space(std::string_view name) {
  if (name == "feature") return InferenceSpace::feature;
  if (name == "weight") return InferenceSpace::weight;
  if (name == "function") return InferenceSpace::function;
  if (name == "none" || name == "deep_ensembles") return InferenceSpace::deep_ensembles;
  throw std::invalid_argument("unknown inference space '" + std::string(name) + "'");
}

PriorSpec default_prior(InferenceSpace space) {
  switch (space) {
    case InferenceSpace::feature: return {PriorFamily::half_cauchy, 1e-3};
    case InferenceSpace::weight: return {PriorFamily::normal, 1e-3};
    case InferenceSpace::function: return {PriorFamily::cauchy, 1e-6};
    case InferenceSpace::deep_ensembles: return {PriorFamily::uniform, 0.0};
  }
  return {};
}

void TrainConfig::validate() const {
  if (ensemble_size == 0) throw std::invalid_argument("ensemble_size must be ≥ 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be ≥ 1");
  if (feature_dim == 0) throw std::invalid_argument("feature_dim must be ≥ 1");
  if (std::any_of(hidden_layers.begin(), hidden_layers.end(), [](std::size_t h) { return h == 0; }))
    throw std::invalid_argument("hidden layer widths must be ≥ 1");
  if (projection_dim == 0) throw std::invalid_argument("projection_dim must be ≥ 1");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be ≥ 0");
  if (!(base_lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
  if (!(lr_decay_ratio > 0.0)) throw std::invalid_argument("lr_decay_ratio must be positive");
  for (std::size_t k = 1; k < lr_decay_epochs.size(); ++k)
    if (lr_decay_epochs[k] <= lr_decay_epochs[k - 1])
      throw std::invalid_argument("lr_decay_epochs must be strictly increasing");
  if (!std::isfinite(prior_grad_scale)) throw std::invalid_argument("prior_grad_scale must be finite");
  prior.validate();
  kernel.validate();
  if (space == InferenceSpace::feature && share_classifier.has_value() && !*share_classifier)
    throw std::invalid_argument("feature-space inference requires a shared classifier");
  if ((space == InferenceSpace::weight || space == InferenceSpace::function) &&
      share_classifier.value_or(false))
    throw std::invalid_argument(to_string(space) + "-space inference uses per-member classifiers");
}

bool TrainConfig::uses_projection() const {
  if (project_repulsion) return *project_repulsion;
  return space == InferenceSpace::feature || space == InferenceSpace::function;
}

bool TrainConfig::shares_classifier() const {
  switch (space) {
    case InferenceSpace::feature: return true;
    case InferenceSpace::weight:
    case InferenceSpace::function: return false;
    case InferenceSpace::deep_ensembles: return share_classifier.value_or(false);
  }
  return false;
}

double lr_at(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.base_lr;
  for (std::size_t e : cfg.lr_decay_epochs)
    if (e <= epoch) lr *= cfg.lr_decay_ratio;
  return lr;
}

bool Ensemble::all_finite() const {
  auto finite = [](const Vector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return std::all_of(particles.begin(), particles.end(),
                     [&](const Particle& p) { return finite(p.params()); }) &&
         std::all_of(heads.begin(), heads.end(), [&](const Classifier& c) { return finite(c.params()); });
}

Ensemble init_ensemble(const TrainConfig& cfg, std::size_t input_dim, std::size_t num_classes) {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
  sizes.push_back(cfg.feature_dim);
  Ensemble e;
  for (std::size_t i = 0; i < cfg.ensemble_size; ++i) e.particles.push_back(Particle::init(sizes, cfg.seed, i));
  const std::size_t heads = cfg.shares_classifier() ? 1 : cfg.ensemble_size;
  for (std::size_t i = 0; i < heads; ++i)
    e.heads.push_back(Classifier::init(cfg.feature_dim, num_classes, cfg.seed, i));
  return e;
}

OptimizerState OptimizerState::zeros_like(const Ensemble& e) {
  OptimizerState s;
  for (const Particle& p : e.particles) s.particle_velocity.emplace_back(p.parameter_count(), 0.0);
  for (const Classifier& c : e.heads) s.head_velocity.emplace_back(c.parameter_count(), 0.0);
  return s;
}

void nesterov_update(std::span<double> param, std::span<double> velocity,
                     std::span<const double> direction, double lr, double momentum) {
  if (param.size() != velocity.size() || param.size() != direction.size())
    throw std::invalid_argument("nesterov_update: shape mismatch");
  for (std::size_t k = 0; k < param.size(); ++k) {
    velocity[k] = momentum * velocity[k] + direction[k];
    param[k] += lr * (momentum * velocity[k] + direction[k]);
  }
}

void apply_update(OptimizerKind kind, std::span<double> param, std::span<double> velocity,
                  std::span<const double> direction, double lr, double momentum) {
  if (kind == OptimizerKind::nesterov) {
    nesterov_update(param, velocity, direction, lr, momentum);
    return;
  }
  if (param.size() != direction.size()) throw std::invalid_argument("sgd update: shape mismatch");
  for (std::size_t k = 0; k < param.size(); ++k) param[k] += lr * direction[k];
}

Vector scaled_direction(std::span<const double> vjp, std::span<const double> params,
                        std::size_t batch, double weight_decay) {
  if (vjp.size() != params.size()) throw std::invalid_argument("scaled_direction: shape mismatch");
  const double inv_b = 1.0 / static_cast<double>(batch);
  Vector v(vjp.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = inv_b * vjp[k] - weight_decay * params[k];
  return v;
}

Vector member_head_direction(std::span<const double> head_grad, const Classifier& head,
                             std::size_t batch, double weight_decay) {
  return scaled_direction(head_grad, head.params(), batch, weight_decay);
}

Vector mean_direction(const std::vector<Vector>& directions) {
  if (directions.empty()) throw std::invalid_argument("mean_direction: nothing to average");
  Vector sum(directions.front().size(), 0.0);
  for (const Vector& d : directions) axpy(1.0, d, sum);
  const double inv_n = 1.0 / static_cast<double>(directions.size());
  for (double& x : sum) x *= inv_n;
  return sum;
}

FeatureLocal feature_local_pass(const Particle& p, const Classifier& head, const Batch& batch,
                                const TrainConfig& cfg) {
  FeatureLocal local;
  local.cache = forward_cached(p, batch.x);
  local.lik = loglik_and_grads(head, local.features(), batch.y);
  local.prior = scaled_prior(cfg, local.features().flat());
  return local;
}

FeatureRepulsion feature_repulsion(const FlatViews& features, const FlatViews& data_grads,
                                   const TrainConfig& cfg) {
  const std::size_t n = features.size();
  const std::size_t d = features.front().size();
  FeatureRepulsion out;
  out.repulsion = Matrix(n, d);
  if (!cfg.repulsion) return out;
  if (!cfg.uses_projection()) {
    const SpaceRepulsion r = space_repulsion(features, data_grads, false, cfg);
    out.repulsion = r.rows;
    return out;
  }
  out.basis = build_basis(data_grads, cfg.projection_dim);
  if (out.basis.effective_k() == 0) return out;
  out.z = project_all(out.basis, features);
  out.bandwidth = bandwidth(cfg.kernel, out.z);
  const Matrix rz = kde_repulsion_all(out.z, out.bandwidth);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector r = lift(out.basis, rz.row(i));
    std::copy(r.begin(), r.end(), out.repulsion.row(i).begin());
  }
  return out;
}

Vector feature_member_direction(const Particle& p, const FeatureLocal& local,
                                std::span<const double> repulsion, const TrainConfig& cfg,
                                std::size_t batch) {
  const Matrix& g = local.lik.g_feat;
  const UpdateDirection dir =
      assemble_direction(Vector(g.flat().begin(), g.flat().end()), local.prior,
                         Vector(repulsion.begin(), repulsion.end()));
  const Matrix v_feat(g.rows(), g.cols(), dir.total());
  const Vector vjp = backprop_to_weights(p, local.cache, v_feat);
  return scaled_direction(vjp, p.params(), batch, cfg.weight_decay);
}

StepStats feature_wgd_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg,
                           OptimizerState& opt, double lr) {
  require_batch(batch);
  if (!e.shared_head()) throw std::invalid_argument("feature-space inference needs a shared classifier");
  const std::size_t n = e.size();
  const std::size_t b = batch.size();

  std::vector<FeatureLocal> local;
  local.reserve(n);
  for (std::size_t i = 0; i < n; ++i) local.push_back(feature_local_pass(e.particles[i], e.heads[0], batch, cfg));

  FlatViews feats, grads;
  for (const FeatureLocal& l : local) {
    feats.push_back(l.features().flat());
    grads.push_back(l.lik.g_feat.flat());
  }
  const FeatureRepulsion rep = feature_repulsion(feats, grads, cfg);

  StepStats stats;
  stats.effective_k = rep.basis.effective_k();
  stats.repulsion_norm = mean_row_norm(rep.repulsion);
  std::vector<Vector> head_dirs;
  head_dirs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector v = feature_member_direction(e.particles[i], local[i], rep.repulsion.row(i), cfg, b);
    apply_update(cfg.optimizer, e.particles[i].params(), opt.particle_velocity[i], v, lr, cfg.momentum);
    head_dirs.push_back(member_head_direction(local[i].lik.g_theta, e.heads[0], b, cfg.weight_decay));
    stats.loglik += local[i].lik.loglik;
    stats.correct += count_correct(local[i].lik.g_logit, batch.y);
    stats.predictions += b;
  }
  const Vector v_theta = mean_direction(head_dirs);
  apply_update(cfg.optimizer, e.heads[0].params(), opt.head_velocity[0], v_theta, lr, cfg.momentum);
  return stats;
}

StepStats deep_ensembles_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg,
                              OptimizerState& opt, double lr) {
  require_batch(batch);
  const std::size_t n = e.size();
  const std::size_t b = batch.size();
  StepStats stats;
  std::vector<Vector> head_dirs;
  for (std::size_t i = 0; i < n; ++i) {
    Classifier& head = e.head(i);
    const ForwardCache cache = forward_cached(e.particles[i], batch.x);
    const LikelihoodGrads lik = loglik_and_grads(head, cache.features(), batch.y);
    const Vector vjp = backprop_to_weights(e.particles[i], cache, lik.g_feat);
    const Vector v = scaled_direction(vjp, e.particles[i].params(), b, cfg.weight_decay);
    apply_update(cfg.optimizer, e.particles[i].params(), opt.particle_velocity[i], v, lr, cfg.momentum);
    Vector v_head = member_head_direction(lik.g_theta, head, b, cfg.weight_decay);
    if (e.shared_head()) {
      head_dirs.push_back(std::move(v_head));
    } else {
      apply_update(cfg.optimizer, head.params(), opt.head_velocity[i], v_head, lr, cfg.momentum);
    }
    stats.loglik += lik.loglik;
    stats.correct += count_correct(lik.g_logit, batch.y);
    stats.predictions += b;
  }
  if (e.shared_head()) {
    const Vector v_theta = mean_direction(head_dirs);
    apply_update(cfg.optimizer, e.heads[0].params(), opt.head_velocity[0], v_theta, lr, cfg.momentum);
  }
  return stats;
}

StepStats weight_wgd_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg,
                          OptimizerState& opt, double lr) {
  require_batch(batch);
  require_per_member_heads(e, "weight-space inference");
  const std::size_t n = e.size();
  const std::size_t b = batch.size();

  // Inferred variable: [w_i, θ_i] concatenated.
  std::vector<Vector> points(n), grads(n);
  StepStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    const Particle& p = e.particles[i];
    const Classifier& head = e.heads[i];
    const ForwardCache cache = forward_cached(p, batch.x);
    const LikelihoodGrads lik = loglik_and_grads(head, cache.features(), batch.y);
    Vector g = backprop_to_weights(p, cache, lik.g_feat);
    g.insert(g.end(), lik.g_theta.begin(), lik.g_theta.end());
    grads[i] = std::move(g);
    Vector w = p.params();
    w.insert(w.end(), head.params().begin(), head.params().end());
    points[i] = std::move(w);
    stats.loglik += lik.loglik;
    stats.correct += count_correct(lik.g_logit, batch.y);
    stats.predictions += b;
  }
  const SpaceRepulsion rep = space_repulsion(flat_views(points), flat_views(grads), cfg.uses_projection(), cfg);
  stats.effective_k = rep.effective_k;
  stats.repulsion_norm = mean_row_norm(rep.rows);

  for (std::size_t i = 0; i < n; ++i) {
    const Vector prior = scaled_prior(cfg, points[i]);
    const UpdateDirection dir =
        assemble_direction(grads[i], prior, Vector(rep.rows.row(i).begin(), rep.rows.row(i).end()));
    const Vector v = scaled_direction(dir.total(), points[i], b, cfg.weight_decay);
    const std::size_t pw = e.particles[i].parameter_count();
    const std::span<const double> vs(v);
    apply_update(cfg.optimizer, e.particles[i].params(), opt.particle_velocity[i], vs.first(pw), lr, cfg.momentum);
    apply_update(cfg.optimizer, e.heads[i].params(), opt.head_velocity[i], vs.subspan(pw), lr, cfg.momentum);
  }
  return stats;
}

StepStats function_wgd_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg,
                            OptimizerState& opt, double lr) {
  require_batch(batch);
  require_per_member_heads(e, "function-space inference");
  const std::size_t n = e.size();
  const std::size_t b = batch.size();

  std::vector<ForwardCache> caches;
  std::vector<Matrix> logits, g_logits;
  StepStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    caches.push_back(forward_cached(e.particles[i], batch.x));
    logits.push_back(classifier_logits(e.heads[i], caches.back().features()));
    LogitGrads lg = logit_loglik_and_grads(logits.back(), batch.y);
    stats.loglik += lg.loglik;
    stats.correct += count_correct(lg.g_logit, batch.y);
    stats.predictions += b;
    g_logits.push_back(std::move(lg.g_logit));
  }
  const SpaceRepulsion rep = space_repulsion(flat_views(logits), flat_views(g_logits), cfg.uses_projection(), cfg);
  stats.effective_k = rep.effective_k;
  stats.repulsion_norm = mean_row_norm(rep.rows);

  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& g = g_logits[i];
    const UpdateDirection dir =
        assemble_direction(Vector(g.flat().begin(), g.flat().end()), scaled_prior(cfg, logits[i].flat()),
                           Vector(rep.rows.row(i).begin(), rep.rows.row(i).end()));
    const Matrix v_logit(g.rows(), g.cols(), dir.total());
    const ClassifierCotangents ct = classifier_backward(e.heads[i], caches[i].features(), v_logit);
    const Vector vjp = backprop_to_weights(e.particles[i], caches[i], ct.g_feat);
    const Vector v_w = scaled_direction(vjp, e.particles[i].params(), b, cfg.weight_decay);
    const Vector v_theta = member_head_direction(ct.g_theta, e.heads[i], b, cfg.weight_decay);
    apply_update(cfg.optimizer, e.particles[i].params(), opt.particle_velocity[i], v_w, lr, cfg.momentum);
    apply_update(cfg.optimizer, e.heads[i].params(), opt.head_velocity[i], v_theta, lr, cfg.momentum);
  }
  return stats;
}

StepStats train_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg, OptimizerState& opt,
                     double lr) {
  switch (cfg.space) {
    case InferenceSpace::feature: return feature_wgd_step(e, batch, cfg, opt, lr);
    case InferenceSpace::weight: return weight_wgd_step(e, batch, cfg, opt, lr);
    case InferenceSpace::function: return function_wgd_step(e, batch, cfg, opt, lr);
    case InferenceSpace::deep_ensembles: return deep_ensembles_step(e, batch, cfg, opt, lr);
  }
  throw std::logic_error("unhandled inference space");
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_samples, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be ≥ 1");
  Rng rng(seed, kBatchStream, epoch);
  const std::vector<std::size_t> perm = rng.permutation(n_samples);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n_samples; start += batch_size) {
    const std::size_t end = std::min(n_samples, start + batch_size);
    out.emplace_back(perm.begin() + static_cast<long>(start), perm.begin() + static_cast<long>(end));
  }
  return out;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = x.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::vector<int> gather(std::span<const int> y, std::span<const std::size_t> idx) {
  std::vector<int> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = y[idx[r]];
  return out;
}

Trainer::Trainer(TrainConfig cfg, std::size_t input_dim, std::size_t num_classes)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  ensemble_ = init_ensemble(cfg_, input_dim, num_classes);
  opt_ = OptimizerState::zeros_like(ensemble_);
}

EpochRecord Trainer::run_epoch(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw std::invalid_argument("inputs and labels differ in length");
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.lr = lr_at(cfg_, epoch_);
  double loglik = 0.0;
  double rep = 0.0;
  std::size_t correct = 0;
  std::size_t predictions = 0;
  std::size_t steps = 0;
  for (const auto& idx : epoch_batches(x.rows(), cfg_.batch_size, cfg_.seed, epoch_)) {
    const Matrix bx = gather_rows(x, idx);
    const std::vector<int> by = gather(y, idx);
    const StepStats s = train_step(ensemble_, Batch{bx, by}, cfg_, opt_, rec.lr);
    if (!ensemble_.all_finite())
      throw TrainingDiverged(step_, "non-finite parameters after step " + std::to_string(step_));
    ++step_;
    ++steps;
    loglik += s.loglik;
    rep += s.repulsion_norm;
    correct += s.correct;
    predictions += s.predictions;
  }
  rec.mean_loglik = predictions ? loglik / static_cast<double>(predictions) : 0.0;
  rec.repulsion_norm = steps ? rep / static_cast<double>(steps) : 0.0;
  rec.accuracy = predictions ? static_cast<double>(correct) / static_cast<double>(predictions) : 0.0;
  ++epoch_;
  return rec;
}

std::vector<EpochRecord> Trainer::fit(const Matrix& x, std::span<const int> y) {
  std::vector<EpochRecord> log;
  while (epoch_ < cfg_.epochs) log.push_back(run_epoch(x, y));
  return log;
}

Matrix gaussian_wgd_sample(const GaussianTarget& target, const Matrix& initial, std::size_t steps,
                           double lr, const KernelSpec& kernel) {
  const std::size_t d = target.mean.size();
  if (target.covariance.rows() != d || target.covariance.cols() != d)
    throw std::invalid_argument("gaussian target: covariance shape does not match mean");
  if (initial.cols() != d || initial.rows() == 0)
    throw std::invalid_argument("gaussian target: initial particles have the wrong shape");
  const SymmetricEigen eig = symmetric_eig(target.covariance);
  if (!(eig.values.back() > 1e-12 * std::max(eig.values.front(), 0.0)) || !(eig.values.back() > 0.0))
    throw std::invalid_argument("gaussian target: covariance is not positive definite");
  Matrix precision(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t k = 0; k < d; ++k)
        precision(a, c) += eig.vectors(a, k) * eig.vectors(c, k) / eig.values[k];

  Matrix x = initial;
  const std::size_t n = x.rows();
  Vector diff(d);
  for (std::size_t t = 0; t < steps; ++t) {
    const Matrix rep = kde_repulsion_all(x, bandwidth(kernel, x));
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = x.row(i);
      for (std::size_t a = 0; a < d; ++a) diff[a] = target.mean[a] - xi[a];
      const Vector drive = matvec(precision, diff);
      for (std::size_t a = 0; a < d; ++a) xi[a] += lr * (drive[a] - rep(i, a));
    }
  }
  return x;
}

Matrix gaussian_wgd_sample(const GaussianTarget& target, std::size_t n, std::size_t steps,
                           double lr, std::uint64_t seed, const KernelSpec& kernel) {
  if (n == 0) throw std::invalid_argument("gaussian_wgd_sample: need at least one particle");
  Rng rng(seed, kGaussianStream);
  Matrix init(n, target.mean.size());
  for (double& v : init.flat()) v = rng.normal();
  return gaussian_wgd_sample(target, init, steps, lr, kernel);
}

}  // namespace fwgd
