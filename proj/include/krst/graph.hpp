#pragma once

#include <string>
#include <vector>

#include "krst/ops.hpp"

namespace krst {

enum class Pooling { Max, Mean, Sum };

Pooling pooling_from_string(const std::string& s);
std::string pooling_to_string(Pooling p);

struct GraphConfig {
    double alpha_spatial = 0.6;
    double alpha_temporal = 0.8;
    long H = 2;
    Pooling pooling_spatial = Pooling::Max;
    Pooling pooling_aggregation = Pooling::Max;
    Pooling pooling_temporal = Pooling::Sum;
    bool relative_enabled = true;
    bool absolute_enabled = true;
    bool disentangled = true;

    void validate() const;
    // Neighbor counts derived from the ratios: max(1, round(alpha * pool)),
    // capped at the pool size.
    long k_spatial(long K) const;
    long k_temporal(long T) const;
    long k_holistic(long n) const;
};

// Per center node: k candidate indices ordered by ascending squared
// distance, ties broken toward the lower index.
struct NeighborIndex {
    long k = 0;
    std::vector<std::vector<long>> idx;
    std::vector<std::vector<double>> dist2;
};

// Brute-force k-NN over rows of X in feature space. The center itself is a
// candidate iff include_self.
NeighborIndex knn_neighbors(const Tensor& X, long k, bool include_self = true);

// out[i] = pool over neighbors j of A[j] + (R[j] - R[i]), per column.
// Either A or R may be undefined to drop its term. Max pooling routes the
// gradient to the first maximal neighbor in list order.
Tensor neighbor_pool(const Tensor& A, const Tensor& R, const NeighborIndex& nbrs, Pooling mode);

struct GraphLayerParams {
    Tensor W_a;  // absolute term weight, undefined when disabled
    Tensor W_r;  // relative term weight, undefined when disabled
};

// One round of message passing: linear maps of X pooled over each center's
// neighborhood, then ReLU (skippable via activate).
Tensor relative_message(const Tensor& X, const NeighborIndex& nbrs, const GraphLayerParams& p,
                        Pooling mode, const GraphConfig& cfg, bool activate = true);

// Message passing within each frame independently; frames never mix.
// collect, when given, receives the per-frame neighbor structure.
Tensor spatial_layer(const Tensor& V, long K, const GraphLayerParams& p, const GraphConfig& cfg,
                     std::vector<NeighborIndex>* collect = nullptr);

// Pools the K object rows of each frame to one row. Sum and mean accumulate
// in sorted value order, so the result is invariant to object order within
// the frame.
Tensor aggregate_frames(const Tensor& S, long K, Pooling mode);

Tensor temporal_layer(const Tensor& F, const GraphLayerParams& p, const GraphConfig& cfg,
                      NeighborIndex* collect = nullptr);

struct GraphLayers {
    std::vector<GraphLayerParams> spatial;
    std::vector<GraphLayerParams> temporal;  // unused in holistic mode
};

struct GraphOut {
    Tensor S;   // T*K x C node features after the spatial stack
    Tensor Tt;  // T x C frame features after the temporal stack
};

// First-layer neighbor structure, kept for attention dumps.
struct GraphTrace {
    std::vector<NeighborIndex> spatial_frames;
    NeighborIndex temporal;
};

// Disentangled mode: H spatial layers (k-NN rebuilt on each layer's
// output), frame aggregation, H temporal layers. Holistic mode: H layers
// over all T*K nodes jointly, then frame aggregation as the temporal
// stand-in.
GraphOut run_graphs(const Tensor& V, long K, const GraphLayers& layers, const GraphConfig& cfg,
                    GraphTrace* trace = nullptr);

}  // namespace krst
