#include "nom/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "nom/checkpoint.hpp"

namespace nom {

void TrainConfig::validate() const {
  if (q < 1 || m_horizon < 1 || n_horizon < 1) throw std::runtime_error("train config: Q, M, N must be >= 1");
  if (base_lr <= 0 || finetune_lr <= 0) throw std::runtime_error("train config: learning rates must be positive");
  if (batch < 1 || steps_per_epoch < 1) throw std::runtime_error("train config: batch and steps must be positive");
}

template <typename T>
Ref relative_l2_loss_t(TapeT<T>& tape, Ref pred, Ref truth) {
  require_same_shape(tape.val(pred).shape, tape.val(truth).shape, "relative_l2_loss");
  Ref diff = tape.sub(pred, truth);
  Ref num = tape.sqrt(tape.sum_rows(tape.mul(diff, diff)));
  Ref den = tape.sqrt(tape.sum_rows(tape.mul(truth, truth)));
  const auto& dv = tape.val(den);
  for (int64_t c = 0; c < dv.size(); ++c)
    if (dv.data[static_cast<size_t>(c)] == T(0))
      throw NumericError("relative_l2_loss: zero-norm target in channel " + std::to_string(c));
  return tape.reduce_mean(tape.div(num, den));
}

double relative_l2_loss(const DenseArray& pred, const DenseArray& truth) {
  Tape tape;
  return static_cast<double>(
      tape.scalar(relative_l2_loss_t(tape, tape.leaf(pred), tape.leaf(truth))));
}

template <typename T>
Ref multi_step_loss_t(TapeT<T>& tape, const BoundStack& bound, const MultiScaleGraph& graph,
                      const std::vector<Ref>& window, const std::vector<Ref>& forcings, int s) {
  if (s < 1) throw ShapeError("multi_step_loss: horizon must be >= 1");
  if (window.size() != static_cast<size_t>(s) + 1 || forcings.size() < static_cast<size_t>(s) + 1)
    throw ShapeError("multi_step_loss: window must hold s+1 states and forcings");
  Ref state = window[0];
  Ref total;
  for (int k = 0; k < s; ++k) {
    state = single_step_t(tape, bound, graph, state, forcings[static_cast<size_t>(k)],
                          forcings[static_cast<size_t>(k) + 1]);
    if (!tape.val(state).all_finite()) throw DivergenceError(k);
    Ref loss_k = relative_l2_loss_t(tape, state, window[static_cast<size_t>(k) + 1]);
    total = k == 0 ? loss_k : tape.add(total, loss_k);
  }
  return tape.scale(total, static_cast<T>(1.0 / s));
}

double cosine_lr(int epoch, int total, double lr_max, double lr_min) {
  if (epoch < 0 || epoch > total) throw std::runtime_error("cosine_lr: epoch outside [0,total]");
  if (total == 0) return lr_max;
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * epoch / total));
}

AdamState AdamState::init_like(const std::vector<DenseArray*>& params) {
  AdamState st;
  for (const auto* p : params) {
    st.m.push_back(DenseArray::zeros(p->shape));
    st.v.push_back(DenseArray::zeros(p->shape));
  }
  return st;
}

void adam_step(const std::vector<DenseArray*>& params, const std::vector<DenseArray>& grads,
               AdamState& state, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_step: parameter/gradient/state count mismatch");
  state.t++;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (size_t p = 0; p < params.size(); ++p) {
    DenseArray& w = *params[p];
    const DenseArray& g = grads[p];
    require_same_shape(w.shape, g.shape, "adam_step");
    for (int64_t i = 0; i < w.size(); ++i) {
      const double gv = static_cast<double>(g.data[static_cast<size_t>(i)]);
      if (!std::isfinite(gv)) throw NumericError("adam_step: non-finite gradient");
      double mv = b1 * static_cast<double>(state.m[p].data[static_cast<size_t>(i)]) + (1.0 - b1) * gv;
      double vv = b2 * static_cast<double>(state.v[p].data[static_cast<size_t>(i)]) + (1.0 - b2) * gv * gv;
      state.m[p].data[static_cast<size_t>(i)] = static_cast<float>(mv);
      state.v[p].data[static_cast<size_t>(i)] = static_cast<float>(vv);
      const double step = lr * (mv / bc1) / (std::sqrt(vv / bc2) + eps);
      w.data[static_cast<size_t>(i)] = static_cast<float>(static_cast<double>(w.data[static_cast<size_t>(i)]) - step);
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t phase, uint64_t epoch) {
  uint64_t h = seed ^ (phase * 0x9e3779b97f4a7c15ULL) ^ (epoch * 0xbf58476d1ce4e5b9ULL);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

struct WindowRefs {
  std::vector<Ref> states;
  std::vector<Ref> forcings;
};

template <typename T>
WindowRefs load_window(TapeT<T>& tape, const FieldSeries& data, size_t start, int s) {
  WindowRefs w;
  for (int k = 0; k <= s; ++k) {
    const size_t r = start + static_cast<size_t>(k);
    w.states.push_back(tape.leaf(prognostic_matrix(data, r).cast<T>(), false));
    w.forcings.push_back(tape.leaf(forcing_matrix(data, r).cast<T>(), false));
  }
  return w;
}

struct EpochRunner {
  const FieldSeries& train;
  const MultiScaleGraph& graph;
  std::vector<Pgn>& models;           // base first
  const std::vector<uint8_t>& frozen;
  std::vector<DenseArray*> trainable;  // slots of the single trainable model
  size_t trainable_model;

  double run_epoch(const TrainConfig& cfg, AdamState& adam, double lr, int horizon,
                   uint64_t epoch_seed) {
    std::mt19937_64 rng(epoch_seed);
    const size_t max_start = train.n_records() - static_cast<size_t>(horizon) - 1;
    double loss_acc = 0.0;
    int64_t loss_count = 0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      std::vector<DenseArray> grad_sum;
      for (auto* p : trainable) grad_sum.push_back(DenseArray::zeros(p->shape));
      for (int b = 0; b < cfg.batch; ++b) {
        const size_t start = static_cast<size_t>(rng() % (max_start + 1));
        Tape tape;
        BoundStack bound = bind_stack(tape, models, frozen, graph, true);
        WindowRefs w = load_window(tape, train, start, horizon);
        Ref loss = multi_step_loss_t(tape, bound, graph, w.states, w.forcings, horizon);
        tape.backward(loss);
        loss_acc += static_cast<double>(tape.scalar(loss));
        loss_count++;
        const auto grads = collect_grads(tape, bound.models[trainable_model]);
        for (size_t p = 0; p < grad_sum.size(); ++p)
          kern::axpy(1.0f, grads[p].data.data(), grad_sum[p].data.data(), grad_sum[p].size());
      }
      const float inv_b = 1.0f / static_cast<float>(cfg.batch);
      for (auto& g : grad_sum)
        for (auto& v : g.data) v *= inv_b;
      adam_step(trainable, grad_sum, adam, lr);
    }
    return loss_acc / static_cast<double>(loss_count);
  }
};

std::vector<DenseArray*> param_slots(Pgn& model) {
  std::vector<DenseArray*> out;
  visit_params<float>(model, [&](const std::string&, DenseArray& a) { out.push_back(&a); });
  return out;
}

ModelStack view_stack(const std::vector<Pgn>& models) {
  ModelStack s;
  s.base = models[0];
  for (size_t i = 1; i < models.size(); ++i) s.residuals.push_back(models[i]);
  s.frozen.assign(models.size(), 0);
  return s;
}

}  // namespace

double validation_loss(const ModelStack& stack, const MultiScaleGraph& graph,
                       const FieldSeries& valid, int horizon, int max_windows) {
  if (valid.n_records() < static_cast<size_t>(horizon) + 1)
    throw std::runtime_error("validation: split shorter than horizon");
  const size_t max_start = valid.n_records() - static_cast<size_t>(horizon) - 1;
  const size_t n = std::min<size_t>(static_cast<size_t>(max_windows), max_start + 1);
  const size_t stride = std::max<size_t>(1, (max_start + 1) / n);
  double acc = 0.0;
  int64_t count = 0;
  std::vector<Pgn> models{stack.base};
  for (const auto& r : stack.residuals) models.push_back(r);
  std::vector<uint8_t> frozen(models.size(), 1);
  for (size_t start = 0; start <= max_start && static_cast<size_t>(count) < n; start += stride) {
    Tape tape;
    BoundStack bound = bind_stack(tape, models, frozen, graph, false);
    WindowRefs w = load_window(tape, valid, start, horizon);
    Ref loss = multi_step_loss_t(tape, bound, graph, w.states, w.forcings, horizon);
    acc += static_cast<double>(tape.scalar(loss));
    count++;
  }
  return acc / static_cast<double>(count);
}

TrainReport train_stage1(const TrainConfig& cfg, const FieldSeries& train, const FieldSeries& valid,
                         const MultiScaleGraph& graph, Pgn& base) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  std::vector<Pgn> models{base};
  std::vector<uint8_t> frozen{0};
  EpochRunner runner{train, graph, models, frozen, param_slots(models[0]), 0};

  auto run_phase = [&](const std::string& phase, uint64_t phase_id, int epochs, int horizon,
                       double lr_max) {
    AdamState adam = AdamState::init_like(runner.trainable);
    for (int e = 0; e < epochs; ++e) {
      const double lr = cosine_lr(e, epochs, lr_max, std::min(cfg.lr_min, lr_max));
      const double train_loss =
          runner.run_epoch(cfg, adam, lr, horizon, mix_seed(cfg.seed, phase_id, static_cast<uint64_t>(e)));
      const double valid_loss = validation_loss(view_stack(models), graph, valid, horizon, cfg.valid_windows);
      if (!std::isfinite(valid_loss))
        throw NumericError("train_stage1: validation loss diverged in phase " + phase);
      report.rows.push_back({phase, e, train_loss, valid_loss, lr});
    }
  };

  run_phase("pretrain", 1, cfg.pretrain_epochs, 1, cfg.base_lr);
  for (int s = 2; s <= cfg.m_horizon; ++s)
    run_phase("finetune_s" + std::to_string(s), static_cast<uint64_t>(100 + s), cfg.finetune_epochs,
              s, cfg.finetune_lr);

  base = models[0];
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

TrainReport train_residual_stage(const TrainConfig& cfg, const FieldSeries& train,
                                 const FieldSeries& valid, const MultiScaleGraph& graph,
                                 ModelStack& stack, size_t residual_index) {
  cfg.validate();
  if (residual_index >= stack.residuals.size())
    throw std::runtime_error("train_residual_stage: no residual model " + std::to_string(residual_index));
  for (size_t i = 0; i < stack.frozen.size(); ++i) {
    const bool is_target = i == residual_index + 1;
    if (is_target && stack.frozen[i])
      throw std::runtime_error("train_residual_stage: target model is frozen");
    if (!is_target && !stack.frozen[i])
      throw std::runtime_error("train_residual_stage: model " + std::to_string(i) +
                               " must be frozen during residual training");
  }
  const uint64_t base_hash_before = pgn_param_hash(stack.base);
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  std::vector<Pgn> models{stack.base};
  for (const auto& r : stack.residuals) models.push_back(r);
  EpochRunner runner{train,  graph, models, stack.frozen, param_slots(models[residual_index + 1]),
                     residual_index + 1};

  AdamState adam = AdamState::init_like(runner.trainable);
  for (int e = 0; e < cfg.residual_epochs; ++e) {
    const double lr = cosine_lr(e, cfg.residual_epochs, cfg.base_lr, std::min(cfg.lr_min, cfg.base_lr));
    const double train_loss = runner.run_epoch(cfg, adam, lr, cfg.n_horizon,
                                               mix_seed(cfg.seed, 1000 + residual_index, static_cast<uint64_t>(e)));
    const double valid_loss =
        validation_loss(view_stack(models), graph, valid, cfg.n_horizon, cfg.valid_windows);
    if (!std::isfinite(valid_loss)) throw NumericError("train_residual_stage: validation loss diverged");
    report.rows.push_back({"residual" + std::to_string(residual_index + 1), e, train_loss, valid_loss, lr});
  }

  stack.residuals[residual_index] = models[residual_index + 1];
  if (pgn_param_hash(stack.base) != base_hash_before)
    throw std::runtime_error("train_residual_stage: frozen base parameters changed");
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void append_report_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const auto& r : report.rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g\n", r.phase.c_str(), r.epoch,
                  r.train_loss, r.valid_loss, r.lr);
    out << buf;
  }
}

template Ref relative_l2_loss_t<float>(TapeT<float>&, Ref, Ref);
template Ref relative_l2_loss_t<double>(TapeT<double>&, Ref, Ref);
template Ref multi_step_loss_t<float>(TapeT<float>&, const BoundStack&, const MultiScaleGraph&,
                                      const std::vector<Ref>&, const std::vector<Ref>&, int);
template Ref multi_step_loss_t<double>(TapeT<double>&, const BoundStack&, const MultiScaleGraph&,
                                       const std::vector<Ref>&, const std::vector<Ref>&, int);

}  // namespace nom
