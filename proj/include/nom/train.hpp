#pragma once

// Relative-L2 objective, adaptive-moment optimizer with cosine-annealed
// learning rate, and the staged schedule: 1-step pretraining, stepwise
// multi-step finetuning of the base model, then residual stages trained
// against the frozen base.

#include <cstdint>
#include <string>
#include <vector>

#include "nom/pipeline.hpp"
#include "nom/stack.hpp"

namespace nom {

struct TrainConfig {
  int64_t q = 2;
  int m_horizon = 3;         // stage-1 finetune grows supervision to this horizon
  int n_horizon = 4;         // residual stages train at this horizon
  int pretrain_epochs = 40;
  int finetune_epochs = 3;   // per horizon
  int residual_epochs = 8;
  double base_lr = 1e-3;
  double finetune_lr = 1e-5;
  double lr_min = 1e-6;
  int batch = 4;
  int steps_per_epoch = 16;
  int valid_windows = 8;
  uint64_t seed = 42;

  void validate() const;
};

struct EpochRecord {
  std::string phase;
  int epoch;
  double train_loss;
  double valid_loss;
  double lr;
};

struct TrainReport {
  std::vector<EpochRecord> rows;
  double wall_seconds = 0.0;
};

void append_report_csv(const TrainReport& report, const std::string& path);

// Mean over channels of ||pred_k - truth_k||_2 / ||truth_k||_2, spatial norms.
template <typename T>
Ref relative_l2_loss_t(TapeT<T>& tape, Ref pred, Ref truth);
double relative_l2_loss(const DenseArray& pred, const DenseArray& truth);

// Rolls the stack s steps from window[0] with gradients through the unroll;
// averages the per-step loss against window[1..s]. Throws DivergenceError on
// a non-finite intermediate state.
template <typename T>
Ref multi_step_loss_t(TapeT<T>& tape, const BoundStack& bound, const MultiScaleGraph& graph,
                      const std::vector<Ref>& window, const std::vector<Ref>& forcings, int s);

double cosine_lr(int epoch, int total, double lr_max, double lr_min);

struct AdamState {
  std::vector<DenseArray> m;
  std::vector<DenseArray> v;
  int64_t t = 0;

  static AdamState init_like(const std::vector<DenseArray*>& params);
};

// beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected. Throws on non-finite
// gradients.
void adam_step(const std::vector<DenseArray*>& params, const std::vector<DenseArray>& grads,
               AdamState& state, double lr);

// Stage 1: pretrain + stepwise finetune of the base model (in place).
TrainReport train_stage1(const TrainConfig& cfg, const FieldSeries& train, const FieldSeries& valid,
                         const MultiScaleGraph& graph, Pgn& base);

// Residual stage q_index (1-based into stack.residuals): trains that model at
// n_horizon supervision through the composed stack; every other model must be
// frozen and is verified byte-identical afterwards.
TrainReport train_residual_stage(const TrainConfig& cfg, const FieldSeries& train,
                                 const FieldSeries& valid, const MultiScaleGraph& graph,
                                 ModelStack& stack, size_t residual_index);

// Mean validation loss at the given horizon over deterministic windows.
double validation_loss(const ModelStack& stack, const MultiScaleGraph& graph,
                       const FieldSeries& valid, int horizon, int max_windows);

}  // namespace nom
