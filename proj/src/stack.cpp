#include "nom/stack.hpp"

namespace nom {

void ModelStack::validate() const {
  const int64_t c_out = base.cfg.out_channels;
  if (base.cfg.in_channels <= c_out || (base.cfg.in_channels - c_out) % 2 != 0)
    throw ShapeError("stack: base in_channels must be out + 2*forcing");
  for (const auto& r : residuals)
    if (r.cfg.in_channels != c_out || r.cfg.out_channels != c_out)
      throw ShapeError("stack: residual models must map prognostic channels to themselves");
  if (frozen.size() != static_cast<size_t>(q())) throw ShapeError("stack: frozen flag per model");
}

ModelStack make_stack(const PgnConfig& base_cfg, int64_t q, uint64_t seed) {
  if (q < 1) throw ShapeError("stack: Q must be >= 1");
  ModelStack s;
  s.base = init_pgn(base_cfg, seed, false);
  PgnConfig res_cfg = base_cfg;
  res_cfg.in_channels = base_cfg.out_channels;
  for (int64_t i = 1; i < q; ++i)
    s.residuals.push_back(init_pgn(res_cfg, seed + static_cast<uint64_t>(i) * 0x9e3779b97f4a7c15ULL,
                                   /*zero_head=*/true));
  s.frozen.assign(static_cast<size_t>(q), 0);
  s.validate();
  return s;
}

template <typename T>
BoundStack bind_stack(TapeT<T>& tape, const std::vector<PgnT<T>>& models,
                      const std::vector<uint8_t>& frozen, const MultiScaleGraph& graph,
                      bool trainable) {
  BoundStack b;
  b.graph = bind_graph(tape, graph);
  for (size_t i = 0; i < models.size(); ++i)
    b.models.push_back(bind_pgn(tape, models[i], trainable && !frozen[i]));
  return b;
}

template <typename T>
Ref single_step_t(TapeT<T>& tape, const BoundStack& bound, const MultiScaleGraph& graph, Ref prev,
                  Ref f_t, Ref f_t1, std::vector<Ref>* stage_outputs) {
  Ref x = tape.concat_cols({prev, f_t, f_t1});
  Ref est = pgn_forward(tape, bound.models[0], bound.graph, graph, x);
  if (stage_outputs) stage_outputs->push_back(est);
  for (size_t q = 1; q < bound.models.size(); ++q) {
    Ref corr = pgn_forward(tape, bound.models[q], bound.graph, graph, est);
    est = tape.add(est, corr);
    if (stage_outputs) stage_outputs->push_back(est);
  }
  return est;
}

DenseArray single_step(const ModelStack& stack, const MultiScaleGraph& graph,
                       const DenseArray& prev, const DenseArray& f_t, const DenseArray& f_t1,
                       std::vector<DenseArray>* stage_outputs) {
  Tape tape;
  BoundStack bound;
  bound.graph = bind_graph(tape, graph);
  bound.models.push_back(bind_pgn(tape, stack.base, false));
  for (const auto& r : stack.residuals) bound.models.push_back(bind_pgn(tape, r, false));
  Ref prev_r = tape.leaf(prev, false);
  Ref ft_r = tape.leaf(f_t, false);
  Ref ft1_r = tape.leaf(f_t1, false);
  std::vector<Ref> stages;
  Ref out = single_step_t(tape, bound, graph, prev_r, ft_r, ft1_r,
                          stage_outputs ? &stages : nullptr);
  if (stage_outputs)
    for (Ref s : stages) stage_outputs->push_back(tape.val(s));
  return tape.val(out);
}

RolloutResult rollout(const ModelStack& stack, const MultiScaleGraph& graph, const DenseArray& o_0,
                      const std::vector<DenseArray>& forcings, int steps) {
  return rollout_with(
      [&](const DenseArray& state, const DenseArray& f_t, const DenseArray& f_t1) {
        return single_step(stack, graph, state, f_t, f_t1);
      },
      o_0, forcings, steps);
}

template BoundStack bind_stack<float>(TapeT<float>&, const std::vector<PgnT<float>>&,
                                      const std::vector<uint8_t>&, const MultiScaleGraph&, bool);
template BoundStack bind_stack<double>(TapeT<double>&, const std::vector<PgnT<double>>&,
                                       const std::vector<uint8_t>&, const MultiScaleGraph&, bool);
template Ref single_step_t<float>(TapeT<float>&, const BoundStack&, const MultiScaleGraph&, Ref,
                                  Ref, Ref, std::vector<Ref>*);
template Ref single_step_t<double>(TapeT<double>&, const BoundStack&, const MultiScaleGraph&, Ref,
                                   Ref, Ref, std::vector<Ref>*);

}  // namespace nom
