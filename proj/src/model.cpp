#include "nom/model.hpp"

#include <cmath>
#include <random>

namespace nom {

namespace {

// Portable uniform in [0,1) from mt19937_64 (the distribution classes differ
// across standard libraries).
double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
LinearT<T> init_linear(std::mt19937_64& rng, int64_t in, int64_t out, bool bias, bool zero) {
  LinearT<T> lin;
  lin.w = DenseArrayT<T>::zeros({in, out});
  if (!zero) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& v : lin.w.data) v = static_cast<T>((2.0 * next_uniform(rng) - 1.0) * a);
  }
  if (bias) lin.b = DenseArrayT<T>::zeros({1, out});
  return lin;
}

template <typename T>
NormT<T> init_norm(int64_t d) {
  return {DenseArrayT<T>::full({d}, T(1)), DenseArrayT<T>::zeros({d})};
}

template <typename T>
MlpT<T> init_mlp(std::mt19937_64& rng, int64_t in, int64_t out) {
  return {init_linear<T>(rng, in, out, true, false), init_norm<T>(out)};
}

template <typename T>
HeadedMlpT<T> init_headed(std::mt19937_64& rng, int64_t in, int64_t hidden, int64_t out,
                          bool zero_head) {
  HeadedMlpT<T> h;
  h.hidden = init_mlp<T>(rng, in, hidden);
  h.head = init_linear<T>(rng, hidden, out, true, zero_head);
  return h;
}

template <typename T>
void visit_linear(const std::string& name, LinearT<T>& l, const ParamFn<T>& fn) {
  fn(name + ".w", l.w);
  if (!l.b.data.empty()) fn(name + ".b", l.b);
}

template <typename T>
void visit_norm(const std::string& name, NormT<T>& n, const ParamFn<T>& fn) {
  fn(name + ".gain", n.gain);
  fn(name + ".bias", n.bias);
}

template <typename T>
void visit_mlp(const std::string& name, MlpT<T>& m, const ParamFn<T>& fn) {
  visit_linear(name + ".lin", m.lin, fn);
  visit_norm(name + ".norm", m.norm, fn);
}

template <typename T>
void visit_fusion(const std::string& name, FusionT<T>& m, const ParamFn<T>& fn) {
  visit_linear(name + ".lin", m.lin, fn);
  visit_norm(name + ".norm", m.norm, fn);
}

template <typename T>
void visit_headed(const std::string& name, HeadedMlpT<T>& m, const ParamFn<T>& fn) {
  visit_mlp(name + ".hidden", m.hidden, fn);
  visit_linear(name + ".head", m.head, fn);
}

template <typename T>
void visit_block(const std::string& name, BlockT<T>& b, bool physics, const ParamFn<T>& fn) {
  if (physics) {
    visit_fusion(name + ".fuse_s", b.fuse_sender, fn);
    visit_fusion(name + ".fuse_r", b.fuse_receiver, fn);
    visit_linear(name + ".edge_w", b.edge_w, fn);
    visit_linear(name + ".sender_w", b.sender_w, fn);
    visit_linear(name + ".receiver_w", b.receiver_w, fn);
    visit_linear(name + ".out_w", b.out_w, fn);
    visit_norm(name + ".out_norm", b.out_norm, fn);
  } else {
    visit_mlp(name + ".plain_edge", b.plain_edge, fn);
  }
  visit_mlp(name + ".mlp_sum", b.mlp_sum, fn);
  visit_mlp(name + ".mlp_mean", b.mlp_mean, fn);
  visit_headed(name + ".gate", b.gate, fn);
  visit_mlp(name + ".mlp_node", b.mlp_node, fn);
}

}  // namespace

template <typename T>
void visit_params(PgnT<T>& p, const ParamFn<T>& fn) {
  visit_mlp<T>("embed_grid", p.embed_grid, fn);
  visit_mlp<T>("embed_mesh", p.embed_mesh, fn);
  visit_mlp<T>("embed_mesh_edge", p.embed_mesh_edge, fn);
  visit_mlp<T>("embed_g2m", p.embed_g2m, fn);
  visit_mlp<T>("embed_m2g", p.embed_m2g, fn);
  visit_mlp<T>("enc_edge", p.enc_edge, fn);
  visit_mlp<T>("enc_mesh", p.enc_mesh, fn);
  visit_mlp<T>("enc_grid", p.enc_grid, fn);
  for (size_t k = 0; k < p.blocks.size(); ++k)
    visit_block<T>("block" + std::to_string(k), p.blocks[k], p.cfg.physics_edges, fn);
  visit_mlp<T>("dec_edge", p.dec_edge, fn);
  visit_mlp<T>("dec_grid", p.dec_grid, fn);
  visit_headed<T>("out_head", p.out_head, fn);
}

int64_t param_count(Pgn& p) {
  int64_t n = 0;
  visit_params<float>(p, [&](const std::string&, DenseArray& a) { n += a.size(); });
  return n;
}

Pgn init_pgn(const PgnConfig& cfg, uint64_t seed, bool zero_head) {
  if (cfg.in_channels < 1 || cfg.out_channels < 1 || cfg.hidden < 1 || cfg.blocks < 0)
    throw ShapeError("init_pgn: bad config");
  std::mt19937_64 rng(seed);
  const int64_t d = cfg.hidden;
  Pgn p;
  p.cfg = cfg;
  p.embed_grid = init_mlp<float>(rng, cfg.in_channels, d);
  p.embed_mesh = init_mlp<float>(rng, 3, d);
  p.embed_mesh_edge = init_mlp<float>(rng, 4, d);
  p.embed_g2m = init_mlp<float>(rng, 4, d);
  p.embed_m2g = init_mlp<float>(rng, 4, d);
  p.enc_edge = init_mlp<float>(rng, 3 * d, d);
  p.enc_mesh = init_mlp<float>(rng, 2 * d, d);
  p.enc_grid = init_mlp<float>(rng, d, d);
  for (int64_t k = 0; k < cfg.blocks; ++k) {
    BlockT<float> b;
    if (cfg.physics_edges) {
      b.fuse_sender = {init_linear<float>(rng, 3 * d + 1, d, true, false), init_norm<float>(d)};
      b.fuse_receiver = {init_linear<float>(rng, 3 * d + 1, d, true, false), init_norm<float>(d)};
      b.edge_w = init_linear<float>(rng, d, d, false, false);
      b.sender_w = init_linear<float>(rng, d, d, false, false);
      b.receiver_w = init_linear<float>(rng, d, d, true, false);
      b.out_w = init_linear<float>(rng, d, d, true, false);
      b.out_norm = init_norm<float>(d);
    } else {
      b.plain_edge = init_mlp<float>(rng, 3 * d, d);
    }
    b.mlp_sum = init_mlp<float>(rng, 2 * d, d);
    b.mlp_mean = init_mlp<float>(rng, 2 * d, d);
    b.gate = init_headed<float>(rng, 2 * d, d, d, false);
    b.mlp_node = init_mlp<float>(rng, d, d);
    p.blocks.push_back(std::move(b));
  }
  p.dec_edge = init_mlp<float>(rng, 3 * d, d);
  p.dec_grid = init_mlp<float>(rng, 2 * d, d);
  p.out_head = init_headed<float>(rng, d, d, cfg.out_channels, zero_head);
  return p;
}

template <typename U, typename T>
PgnT<U> cast_pgn(const PgnT<T>& p) {
  if constexpr (std::is_same_v<U, T>) {
    return p;
  } else {
    const PgnConfig cfg = p.cfg;
    PgnT<U> shaped;
    shaped.cfg = cfg;
    auto cl = [](const LinearT<T>& l) {
      LinearT<U> r;
      r.w = l.w.template cast<U>();
      if (!l.b.data.empty()) r.b = l.b.template cast<U>();
      return r;
    };
    auto cn = [](const NormT<T>& n) {
      return NormT<U>{n.gain.template cast<U>(), n.bias.template cast<U>()};
    };
    auto cm = [&](const MlpT<T>& m) { return MlpT<U>{cl(m.lin), cn(m.norm)}; };
    auto cf = [&](const FusionT<T>& m) { return FusionT<U>{cl(m.lin), cn(m.norm)}; };
    auto ch = [&](const HeadedMlpT<T>& m) { return HeadedMlpT<U>{cm(m.hidden), cl(m.head)}; };
    shaped.embed_grid = cm(p.embed_grid);
    shaped.embed_mesh = cm(p.embed_mesh);
    shaped.embed_mesh_edge = cm(p.embed_mesh_edge);
    shaped.embed_g2m = cm(p.embed_g2m);
    shaped.embed_m2g = cm(p.embed_m2g);
    shaped.enc_edge = cm(p.enc_edge);
    shaped.enc_mesh = cm(p.enc_mesh);
    shaped.enc_grid = cm(p.enc_grid);
    for (const auto& b : p.blocks) {
      BlockT<U> nb;
      if (cfg.physics_edges) {
        nb.fuse_sender = cf(b.fuse_sender);
        nb.fuse_receiver = cf(b.fuse_receiver);
        nb.edge_w = cl(b.edge_w);
        nb.sender_w = cl(b.sender_w);
        nb.receiver_w = cl(b.receiver_w);
        nb.out_w = cl(b.out_w);
        nb.out_norm = cn(b.out_norm);
      } else {
        nb.plain_edge = cm(b.plain_edge);
      }
      nb.mlp_sum = cm(b.mlp_sum);
      nb.mlp_mean = cm(b.mlp_mean);
      nb.gate = ch(b.gate);
      nb.mlp_node = cm(b.mlp_node);
      shaped.blocks.push_back(std::move(nb));
    }
    shaped.dec_edge = cm(p.dec_edge);
    shaped.dec_grid = cm(p.dec_grid);
    shaped.out_head = ch(p.out_head);
    return shaped;
  }
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
BoundLinear bind_linear(TapeT<T>& tape, const LinearT<T>& l, bool trainable, std::vector<Ref>& leaves) {
  BoundLinear b;
  b.w = tape.leaf(l.w, trainable);
  leaves.push_back(b.w);
  if (!l.b.data.empty()) {
    b.b = tape.leaf(l.b, trainable);
    leaves.push_back(b.b);
  }
  return b;
}

template <typename T>
BoundNorm bind_norm(TapeT<T>& tape, const NormT<T>& n, bool trainable, std::vector<Ref>& leaves) {
  BoundNorm b;
  b.gain = tape.leaf(n.gain, trainable);
  leaves.push_back(b.gain);
  b.bias = tape.leaf(n.bias, trainable);
  leaves.push_back(b.bias);
  return b;
}

template <typename T>
BoundMlp bind_mlp(TapeT<T>& tape, const MlpT<T>& m, bool trainable, std::vector<Ref>& leaves) {
  BoundMlp b;
  b.lin = bind_linear(tape, m.lin, trainable, leaves);
  b.norm = bind_norm(tape, m.norm, trainable, leaves);
  return b;
}

template <typename T>
BoundMlp bind_fusion(TapeT<T>& tape, const FusionT<T>& m, bool trainable, std::vector<Ref>& leaves) {
  BoundMlp b;
  b.lin = bind_linear(tape, m.lin, trainable, leaves);
  b.norm = bind_norm(tape, m.norm, trainable, leaves);
  return b;
}

template <typename T>
BoundHeaded bind_headed(TapeT<T>& tape, const HeadedMlpT<T>& m, bool trainable, std::vector<Ref>& leaves) {
  BoundHeaded b;
  b.hidden = bind_mlp(tape, m.hidden, trainable, leaves);
  b.head = bind_linear(tape, m.head, trainable, leaves);
  return b;
}

// Linear layer application: x.W (+ b).
template <typename T>
Ref apply_linear(TapeT<T>& tape, const BoundLinear& l, Ref x) {
  Ref y = tape.matmul(x, l.w);
  if (l.b.valid()) y = tape.add(y, l.b);
  return y;
}

template <typename T>
Ref apply_mlp(TapeT<T>& tape, const BoundMlp& m, Ref x) {
  return tape.layer_norm(tape.silu(apply_linear(tape, m.lin, x)), m.norm.gain, m.norm.bias);
}

template <typename T>
Ref apply_fusion(TapeT<T>& tape, const BoundMlp& m, Ref x) {
  return tape.silu(tape.layer_norm(apply_linear(tape, m.lin, x), m.norm.gain, m.norm.bias));
}

template <typename T>
Ref apply_headed(TapeT<T>& tape, const BoundHeaded& m, Ref x) {
  return apply_linear(tape, m.head, apply_mlp(tape, m.hidden, x));
}

}  // namespace

template <typename T>
BoundPgn bind_pgn(TapeT<T>& tape, const PgnT<T>& p, bool trainable) {
  BoundPgn b;
  b.cfg = p.cfg;
  auto& lv = b.leaves;
  b.embed_grid = bind_mlp(tape, p.embed_grid, trainable, lv);
  b.embed_mesh = bind_mlp(tape, p.embed_mesh, trainable, lv);
  b.embed_mesh_edge = bind_mlp(tape, p.embed_mesh_edge, trainable, lv);
  b.embed_g2m = bind_mlp(tape, p.embed_g2m, trainable, lv);
  b.embed_m2g = bind_mlp(tape, p.embed_m2g, trainable, lv);
  b.enc_edge = bind_mlp(tape, p.enc_edge, trainable, lv);
  b.enc_mesh = bind_mlp(tape, p.enc_mesh, trainable, lv);
  b.enc_grid = bind_mlp(tape, p.enc_grid, trainable, lv);
  for (auto& blk : p.blocks) {
    BoundBlock bb;
    if (p.cfg.physics_edges) {
      bb.fuse_sender = bind_fusion(tape, blk.fuse_sender, trainable, lv);
      bb.fuse_receiver = bind_fusion(tape, blk.fuse_receiver, trainable, lv);
      bb.edge_w = bind_linear(tape, blk.edge_w, trainable, lv);
      bb.sender_w = bind_linear(tape, blk.sender_w, trainable, lv);
      bb.receiver_w = bind_linear(tape, blk.receiver_w, trainable, lv);
      bb.out_w = bind_linear(tape, blk.out_w, trainable, lv);
      bb.out_norm = bind_norm(tape, blk.out_norm, trainable, lv);
    } else {
      bb.plain_edge = bind_mlp(tape, blk.plain_edge, trainable, lv);
    }
    bb.mlp_sum = bind_mlp(tape, blk.mlp_sum, trainable, lv);
    bb.mlp_mean = bind_mlp(tape, blk.mlp_mean, trainable, lv);
    bb.gate = bind_headed(tape, blk.gate, trainable, lv);
    bb.mlp_node = bind_mlp(tape, blk.mlp_node, trainable, lv);
    b.blocks.push_back(bb);
  }
  b.dec_edge = bind_mlp(tape, p.dec_edge, trainable, lv);
  b.dec_grid = bind_mlp(tape, p.dec_grid, trainable, lv);
  b.out_head = bind_headed(tape, p.out_head, trainable, lv);
  return b;
}

template <typename T>
BoundGraph bind_graph(TapeT<T>& tape, const MultiScaleGraph& graph) {
  BoundGraph b;
  b.mesh_geom = tape.leaf(graph.mesh_node_geom.template cast<T>(), false);
  b.mesh_edge_geom = tape.leaf(graph.mesh_edges.geom.template cast<T>(), false);
  b.g2m_geom = tape.leaf(graph.g2m.geom.template cast<T>(), false);
  b.m2g_geom = tape.leaf(graph.m2g.geom.template cast<T>(), false);
  return b;
}

template <typename T>
std::vector<DenseArrayT<T>> collect_grads(const TapeT<T>& tape, const BoundPgn& bound) {
  std::vector<DenseArrayT<T>> out;
  out.reserve(bound.leaves.size());
  for (Ref r : bound.leaves) out.push_back(tape.grad(r));
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
LatentRefs pgn_embed(TapeT<T>& tape, const BoundPgn& m, const BoundGraph& bg,
                     const MultiScaleGraph& graph, Ref grid_input) {
  const auto& x = tape.val(grid_input);
  if (x.rows() != graph.n_grid() || x.cols() != m.cfg.in_channels)
    throw ShapeError("pgn_embed: input " + x.shape_str() + ", expected [" +
                     std::to_string(graph.n_grid()) + "x" + std::to_string(m.cfg.in_channels) +
                     "] (prognostic + forcing t + forcing t+1)");
  LatentRefs lat;
  lat.grid = apply_mlp(tape, m.embed_grid, grid_input);
  lat.mesh = apply_mlp(tape, m.embed_mesh, bg.mesh_geom);
  lat.mesh_edge = apply_mlp(tape, m.embed_mesh_edge, bg.mesh_edge_geom);
  lat.g2m_edge = apply_mlp(tape, m.embed_g2m, bg.g2m_geom);
  lat.m2g_edge = apply_mlp(tape, m.embed_m2g, bg.m2g_geom);
  return lat;
}

template <typename T>
void pgn_encode(TapeT<T>& tape, const BoundPgn& m, const MultiScaleGraph& graph, LatentRefs& lat) {
  Ref vs = tape.gather_rows(lat.grid, graph.g2m.senders);
  Ref hr = tape.gather_rows(lat.mesh, graph.g2m.receivers);
  Ref e_new = apply_mlp(tape, m.enc_edge, tape.concat_cols({lat.g2m_edge, vs, hr}));
  Ref agg = tape.segment_aggregate(e_new, graph.g2m.receivers, graph.n_mesh(), AggMode::Sum);
  Ref h_new = apply_mlp(tape, m.enc_mesh, tape.concat_cols({lat.mesh, agg}));
  Ref v_new = apply_mlp(tape, m.enc_grid, lat.grid);
  lat.g2m_edge = tape.add(lat.g2m_edge, e_new);
  lat.mesh = tape.add(lat.mesh, h_new);
  lat.grid = tape.add(lat.grid, v_new);
}

template <typename T>
void pagm_block(TapeT<T>& tape, const BoundBlock& blk, const MultiScaleGraph& graph, Ref& mesh,
                Ref& mesh_edge, GateMode mode, GateClamp clamp) {
  const auto& senders = graph.mesh_edges.senders;
  const auto& receivers = graph.mesh_edges.receivers;
  Ref hs = tape.gather_rows(mesh, senders);
  Ref hr = tape.gather_rows(mesh, receivers);

  Ref e_new;
  if (blk.plain_edge.lin.w.valid()) {
    e_new = apply_mlp(tape, blk.plain_edge, tape.concat_cols({mesh_edge, hs, hr}));
  } else {
    Ref hd = tape.sub(hs, hr);
    Ref hmp = tape.mul(hs, hr);
    Ref hcos = tape.cosine_rows(hs, hr);
    Ref fs = apply_fusion(tape, blk.fuse_sender, tape.concat_cols({hs, hd, hmp, hcos}));
    Ref fr = apply_fusion(tape, blk.fuse_receiver, tape.concat_cols({hr, hd, hmp, hcos}));
    Ref pre = tape.add(tape.add(apply_linear(tape, blk.edge_w, mesh_edge),
                                apply_linear(tape, blk.sender_w, fs)),
                       apply_linear(tape, blk.receiver_w, fr));
    Ref lin_out = apply_linear(tape, blk.out_w, tape.silu(pre));
    e_new = tape.layer_norm(lin_out, blk.out_norm.gain, blk.out_norm.bias);
  }
  mesh_edge = tape.add(mesh_edge, e_new);

  const int64_t n_mesh = tape.val(mesh).rows();
  Ref agg_sum = tape.segment_aggregate(mesh_edge, receivers, n_mesh, AggMode::Sum);
  Ref agg_mean = tape.segment_aggregate(mesh_edge, receivers, n_mesh, AggMode::Mean);
  Ref h_sum = apply_mlp(tape, blk.mlp_sum, tape.concat_cols({mesh, agg_sum}));
  Ref h_mean = apply_mlp(tape, blk.mlp_mean, tape.concat_cols({mesh, agg_mean}));

  Ref blended;
  if (mode == GateMode::SumOnly) {
    blended = h_sum;
  } else if (mode == GateMode::MeanOnly) {
    blended = h_mean;
  } else {
    Ref gamma;
    switch (clamp) {
      case GateClamp::Zero:
        gamma = tape.leaf(DenseArrayT<T>::zeros(tape.val(h_sum).shape), false);
        break;
      case GateClamp::One:
        gamma = tape.leaf(DenseArrayT<T>::full(tape.val(h_sum).shape, T(1)), false);
        break;
      case GateClamp::None: {
        // squash, then pull into [eps, 1-eps]: float logistic saturates to
        // exactly 0/1 for large pre-activations, the gate must not
        Ref sig = tape.logistic(apply_headed(tape, blk.gate, tape.concat_cols({h_sum, h_mean})));
        constexpr T kGateEps = static_cast<T>(1e-6);
        Ref floor = tape.leaf(DenseArrayT<T>::full(tape.val(sig).shape, kGateEps), false);
        gamma = tape.add(tape.scale(sig, T(1) - 2 * kGateEps), floor);
        break;
      }
    }
    // gamma*sum + (1-gamma)*mean, arranged so equal branches blend exactly
    blended = tape.add(h_mean, tape.mul(gamma, tape.sub(h_sum, h_mean)));
  }
  Ref h_new = apply_mlp(tape, blk.mlp_node, blended);
  mesh = tape.add(mesh, h_new);
}

template <typename T>
Ref pgn_decode(TapeT<T>& tape, const BoundPgn& m, const MultiScaleGraph& graph,
               const LatentRefs& lat) {
  Ref hs = tape.gather_rows(lat.mesh, graph.m2g.senders);
  Ref vr = tape.gather_rows(lat.grid, graph.m2g.receivers);
  Ref e_new = apply_mlp(tape, m.dec_edge, tape.concat_cols({lat.m2g_edge, hs, vr}));
  Ref agg = tape.segment_aggregate(e_new, graph.m2g.receivers, graph.n_grid(), AggMode::Sum);
  Ref v_new = apply_mlp(tape, m.dec_grid, tape.concat_cols({lat.grid, agg}));
  Ref v = tape.add(lat.grid, v_new);
  return apply_headed(tape, m.out_head, v);
}

template <typename T>
Ref pgn_forward(TapeT<T>& tape, const BoundPgn& m, const BoundGraph& bg,
                const MultiScaleGraph& graph, Ref grid_input, GateClamp clamp) {
  if (!tape.val(grid_input).all_finite())
    throw NumericError("pgn_forward: non-finite values in input");
  LatentRefs lat = pgn_embed(tape, m, bg, graph, grid_input);
  pgn_encode(tape, m, graph, lat);
  for (const auto& blk : m.blocks)
    pagm_block(tape, blk, graph, lat.mesh, lat.mesh_edge, m.cfg.gate, clamp);
  return pgn_decode(tape, m, graph, lat);
}

// Explicit instantiations.
template void visit_params<float>(PgnT<float>&, const ParamFn<float>&);
template void visit_params<double>(PgnT<double>&, const ParamFn<double>&);
template PgnT<double> cast_pgn<double, float>(const PgnT<float>&);
template PgnT<float> cast_pgn<float, float>(const PgnT<float>&);
template BoundPgn bind_pgn<float>(TapeT<float>&, const PgnT<float>&, bool);
template BoundPgn bind_pgn<double>(TapeT<double>&, const PgnT<double>&, bool);
template BoundGraph bind_graph<float>(TapeT<float>&, const MultiScaleGraph&);
template BoundGraph bind_graph<double>(TapeT<double>&, const MultiScaleGraph&);
template std::vector<DenseArrayT<float>> collect_grads<float>(const TapeT<float>&, const BoundPgn&);
template std::vector<DenseArrayT<double>> collect_grads<double>(const TapeT<double>&,
                                                                const BoundPgn&);
template LatentRefs pgn_embed<float>(TapeT<float>&, const BoundPgn&, const BoundGraph&,
                                     const MultiScaleGraph&, Ref);
template LatentRefs pgn_embed<double>(TapeT<double>&, const BoundPgn&, const BoundGraph&,
                                      const MultiScaleGraph&, Ref);
template void pgn_encode<float>(TapeT<float>&, const BoundPgn&, const MultiScaleGraph&,
                                LatentRefs&);
template void pgn_encode<double>(TapeT<double>&, const BoundPgn&, const MultiScaleGraph&,
                                 LatentRefs&);
template void pagm_block<float>(TapeT<float>&, const BoundBlock&, const MultiScaleGraph&, Ref&,
                                Ref&, GateMode, GateClamp);
template void pagm_block<double>(TapeT<double>&, const BoundBlock&, const MultiScaleGraph&, Ref&,
                                 Ref&, GateMode, GateClamp);
template Ref pgn_decode<float>(TapeT<float>&, const BoundPgn&, const MultiScaleGraph&,
                               const LatentRefs&);
template Ref pgn_decode<double>(TapeT<double>&, const BoundPgn&, const MultiScaleGraph&,
                                const LatentRefs&);
template Ref pgn_forward<float>(TapeT<float>&, const BoundPgn&, const BoundGraph&,
                                const MultiScaleGraph&, Ref, GateClamp);
template Ref pgn_forward<double>(TapeT<double>&, const BoundPgn&, const BoundGraph&,
                                 const MultiScaleGraph&, Ref, GateClamp);

}  // namespace nom
