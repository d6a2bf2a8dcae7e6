#pragma once

// Residual-correction cascade: a base network predicts the next state, then
// Q-1 residual networks each correct the previous stage's output. The rollout
// loop feeds each prediction back as the next input.

#include <vector>

#include "nom/model.hpp"

namespace nom {

struct DivergenceError : std::runtime_error {
  int step;
  explicit DivergenceError(int s)
      : std::runtime_error("non-finite state at rollout step " + std::to_string(s)), step(s) {}
};

struct ModelStack {
  Pgn base;                     // in = out + 2 * forcing channels
  std::vector<Pgn> residuals;   // in = out = prognostic channels
  std::vector<uint8_t> frozen;  // per model: base, then residuals

  int64_t q() const { return 1 + static_cast<int64_t>(residuals.size()); }
  int64_t out_channels() const { return base.cfg.out_channels; }
  int64_t forcing_channels() const { return (base.cfg.in_channels - base.cfg.out_channels) / 2; }

  void validate() const;
};

ModelStack make_stack(const PgnConfig& base_cfg, int64_t q, uint64_t seed);

struct BoundStack {
  std::vector<BoundPgn> models;  // base first
  BoundGraph graph;
};

// Binds base + residuals; model i is trainable when trainable && !frozen[i].
template <typename T>
BoundStack bind_stack(TapeT<T>& tape, const std::vector<PgnT<T>>& models,
                      const std::vector<uint8_t>& frozen, const MultiScaleGraph& graph,
                      bool trainable);

// One cascade step on the tape: X = concat(prev, f_t, f_t1); base predicts,
// each residual stage adds its correction to the running estimate.
template <typename T>
Ref single_step_t(TapeT<T>& tape, const BoundStack& bound, const MultiScaleGraph& graph, Ref prev,
                  Ref f_t, Ref f_t1, std::vector<Ref>* stage_outputs = nullptr);

// Value-level convenience over a fresh tape (inference path).
DenseArray single_step(const ModelStack& stack, const MultiScaleGraph& graph,
                       const DenseArray& prev, const DenseArray& f_t, const DenseArray& f_t1,
                       std::vector<DenseArray>* stage_outputs = nullptr);

struct RolloutResult {
  std::vector<DenseArray> states;  // predictions for steps 1..T (or fewer on divergence)
  int diverged_at = -1;            // step index of first non-finite state, -1 if clean

  bool diverged() const { return diverged_at >= 0; }
};

// Core loop over any step function (state, f_t, f_t1) -> state; aborts with
// the step index when a state goes non-finite.
template <typename StepFn>
RolloutResult rollout_with(StepFn&& step, const DenseArray& o_0,
                           const std::vector<DenseArray>& forcings, int steps) {
  if (steps < 1) throw ShapeError("rollout: steps must be >= 1");
  if (static_cast<int>(forcings.size()) < steps + 1)
    throw ShapeError("rollout: need forcing for indices 0.." + std::to_string(steps));
  RolloutResult result;
  DenseArray state = o_0;
  for (int t = 0; t < steps; ++t) {
    try {
      state = step(state, forcings[static_cast<size_t>(t)], forcings[static_cast<size_t>(t) + 1]);
    } catch (const NumericError&) {
      // a cascade stage fed non-finite values forward
      result.diverged_at = t;
      return result;
    }
    if (!state.all_finite()) {
      result.diverged_at = t;
      return result;
    }
    result.states.push_back(state);
  }
  return result;
}

// forcings[t] for t = 0..T; performs T steps.
RolloutResult rollout(const ModelStack& stack, const MultiScaleGraph& graph,
                      const DenseArray& o_0, const std::vector<DenseArray>& forcings, int steps);

}  // namespace nom
