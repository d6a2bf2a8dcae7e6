#pragma once

// Physics-guided graph network: grid->mesh encoder, stacked processor blocks
// with physics edge interactions and gated sum/mean aggregation, mesh->grid
// decoder. Forward passes are written against the tape so one code path
// serves training, inference, and the double-precision oracle.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nom/graph.hpp"
#include "nom/tape.hpp"

namespace nom {

enum class GateMode { Adaptive, SumOnly, MeanOnly };
enum class GateClamp { None, Zero, One };  // test hook: force gamma to 0 or 1

struct PgnConfig {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t hidden = 64;
  int64_t blocks = 4;
  bool physics_edges = true;
  GateMode gate = GateMode::Adaptive;
};

template <typename T>
struct LinearT {
  DenseArrayT<T> w;  // [in x out]
  DenseArrayT<T> b;  // [1 x out], empty when the layer has no bias
};

template <typename T>
struct NormT {
  DenseArrayT<T> gain;  // [d]
  DenseArrayT<T> bias;  // [d]
};

// Linear -> SiLU -> LayerNorm
template <typename T>
struct MlpT {
  LinearT<T> lin;
  NormT<T> norm;
};

// Linear -> LayerNorm -> SiLU (fusion networks in the edge interaction)
template <typename T>
struct FusionT {
  LinearT<T> lin;
  NormT<T> norm;
};

// Hidden MLP followed by a bare linear head (no activation, no norm).
template <typename T>
struct HeadedMlpT {
  MlpT<T> hidden;
  LinearT<T> head;
};

template <typename T>
struct BlockT {
  // physics edge interaction
  FusionT<T> fuse_sender;
  FusionT<T> fuse_receiver;
  LinearT<T> edge_w;      // W_e
  LinearT<T> sender_w;    // W_s
  LinearT<T> receiver_w;  // W_r with bias b_r
  LinearT<T> out_w;       // W with bias b
  NormT<T> out_norm;
  // plain concat-MLP edge update (used when physics_edges is off)
  MlpT<T> plain_edge;
  // gated node aggregation
  MlpT<T> mlp_sum;
  MlpT<T> mlp_mean;
  HeadedMlpT<T> gate;
  MlpT<T> mlp_node;
};

template <typename T>
struct PgnT {
  PgnConfig cfg;
  MlpT<T> embed_grid;
  MlpT<T> embed_mesh;
  MlpT<T> embed_mesh_edge;
  MlpT<T> embed_g2m;
  MlpT<T> embed_m2g;
  MlpT<T> enc_edge;  // concat(e, v_sender, h_receiver)
  MlpT<T> enc_mesh;  // concat(h, sum of incoming encoded edges)
  MlpT<T> enc_grid;
  std::vector<BlockT<T>> blocks;
  MlpT<T> dec_edge;
  MlpT<T> dec_grid;
  HeadedMlpT<T> out_head;
};

using Pgn = PgnT<float>;

// Stable parameter enumeration; fixes checkpoint record order and the
// optimizer slot order.
template <typename T>
using ParamFn = std::function<void(const std::string&, DenseArrayT<T>&)>;

template <typename T>
void visit_params(PgnT<T>& p, const ParamFn<T>& fn);

int64_t param_count(Pgn& p);

// Glorot-uniform linear weights, zero biases, unit/zero norm. zero_head
// zeroes the output head so a fresh model predicts an exactly-zero delta
// (residual stages start as the identity correction).
Pgn init_pgn(const PgnConfig& cfg, uint64_t seed, bool zero_head = false);

template <typename U, typename T>
PgnT<U> cast_pgn(const PgnT<T>& p);

// ---------------------------------------------------------------------------
// Tape binding

struct BoundLinear {
  Ref w, b;
};
struct BoundNorm {
  Ref gain, bias;
};
struct BoundMlp {
  BoundLinear lin;
  BoundNorm norm;
};
struct BoundHeaded {
  BoundMlp hidden;
  BoundLinear head;
};
struct BoundBlock {
  BoundMlp fuse_sender, fuse_receiver;  // fusion nets share the Mlp ref layout
  BoundLinear edge_w, sender_w, receiver_w, out_w;
  BoundNorm out_norm;
  BoundMlp plain_edge;
  BoundMlp mlp_sum, mlp_mean, mlp_node;
  BoundHeaded gate;
};

struct BoundPgn {
  PgnConfig cfg;
  BoundMlp embed_grid, embed_mesh, embed_mesh_edge, embed_g2m, embed_m2g;
  BoundMlp enc_edge, enc_mesh, enc_grid;
  std::vector<BoundBlock> blocks;
  BoundMlp dec_edge, dec_grid;
  BoundHeaded out_head;
  std::vector<Ref> leaves;  // aligned with visit_params order
};

struct BoundGraph {
  Ref mesh_geom, mesh_edge_geom, g2m_geom, m2g_geom;
};

template <typename T>
BoundPgn bind_pgn(TapeT<T>& tape, const PgnT<T>& params, bool trainable);

template <typename T>
BoundGraph bind_graph(TapeT<T>& tape, const MultiScaleGraph& graph);

// Gradients for every parameter in visit order (zeros where unreached).
template <typename T>
std::vector<DenseArrayT<T>> collect_grads(const TapeT<T>& tape, const BoundPgn& bound);

// ---------------------------------------------------------------------------
// Forward passes

struct LatentRefs {
  Ref grid, mesh, mesh_edge, g2m_edge, m2g_edge;
};

template <typename T>
LatentRefs pgn_embed(TapeT<T>& tape, const BoundPgn& m, const BoundGraph& bg,
                     const MultiScaleGraph& graph, Ref grid_input);

template <typename T>
void pgn_encode(TapeT<T>& tape, const BoundPgn& m, const MultiScaleGraph& graph, LatentRefs& lat);

template <typename T>
void pagm_block(TapeT<T>& tape, const BoundBlock& blk, const MultiScaleGraph& graph, Ref& mesh,
                Ref& mesh_edge, GateMode mode, GateClamp clamp);

template <typename T>
Ref pgn_decode(TapeT<T>& tape, const BoundPgn& m, const MultiScaleGraph& graph,
               const LatentRefs& lat);

template <typename T>
Ref pgn_forward(TapeT<T>& tape, const BoundPgn& m, const BoundGraph& bg,
                const MultiScaleGraph& graph, Ref grid_input, GateClamp clamp = GateClamp::None);

}  // namespace nom
