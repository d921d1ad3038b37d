#include "krst/graph.hpp"

#include <algorithm>
#include <cmath>

namespace krst {

Pooling pooling_from_string(const std::string& s) {
    if (s == "max") return Pooling::Max;
    if (s == "mean") return Pooling::Mean;
    if (s == "sum") return Pooling::Sum;
    throw ConfigError("unknown pooling '" + s + "', expected max|mean|sum");
}

std::string pooling_to_string(Pooling p) {
    switch (p) {
        case Pooling::Max: return "max";
        case Pooling::Mean: return "mean";
        default: return "sum";
    }
}

void GraphConfig::validate() const {
    if (!relative_enabled && !absolute_enabled)
        throw ConfigError("graph: relative and absolute terms cannot both be disabled");
    if (H < 1) throw ConfigError("graph: H must be >= 1");
    if (alpha_spatial < 0.0 || alpha_spatial > 1.0 || alpha_temporal < 0.0 ||
        alpha_temporal > 1.0)
        throw ConfigError("graph: neighbor ratios must lie in [0,1]");
}

namespace {
long ratio_to_k(double alpha, long pool) {
    long k = std::max<long>(1, std::llround(alpha * static_cast<double>(pool)));
    return std::min(k, pool);
}
}  // namespace

long GraphConfig::k_spatial(long K) const { return ratio_to_k(alpha_spatial, K); }
long GraphConfig::k_temporal(long T) const { return ratio_to_k(alpha_temporal, T); }
long GraphConfig::k_holistic(long n) const { return ratio_to_k(alpha_spatial, n); }

NeighborIndex knn_neighbors(const Tensor& X, long k, bool include_self) {
    long n = X.rows();
    long c = X.cols();
    long candidates = include_self ? n : n - 1;
    if (k < 1 || k > candidates)
        throw ConfigError("knn_neighbors: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(candidates) + "]");
    const std::vector<double>& v = X.value();
    NeighborIndex out;
    out.k = k;
    out.idx.resize(n);
    out.dist2.resize(n);
    std::vector<std::pair<double, long>> cand;
    for (long i = 0; i < n; ++i) {
        cand.clear();
        for (long j = 0; j < n; ++j) {
            if (!include_self && j == i) continue;
            double d2 = 0.0;
            for (long x = 0; x < c; ++x) {
                double diff = v[i * c + x] - v[j * c + x];
                d2 += diff * diff;
            }
            cand.emplace_back(d2, j);
        }
        std::sort(cand.begin(), cand.end());
        out.idx[i].reserve(k);
        out.dist2[i].reserve(k);
        for (long r = 0; r < k; ++r) {
            out.idx[i].push_back(cand[r].second);
            out.dist2[i].push_back(cand[r].first);
        }
    }
    return out;
}

Tensor neighbor_pool(const Tensor& A, const Tensor& R, const NeighborIndex& nbrs, Pooling mode) {
    if (!A.defined() && !R.defined())
        throw ConfigError("neighbor_pool: both inputs undefined");
    const Tensor& ref = A.defined() ? A : R;
    long n = ref.rows();
    long c = ref.cols();
    if (A.defined() && R.defined() && (A.rows() != R.rows() || A.cols() != R.cols()))
        throw DimError("neighbor_pool: A and R shapes differ");
    if (static_cast<long>(nbrs.idx.size()) != n)
        throw DimError("neighbor_pool: neighbor index built for a different node count");

    const std::vector<double>* av = A.defined() ? &A.value() : nullptr;
    const std::vector<double>* rv = R.defined() ? &R.value() : nullptr;
    auto term = [&](long i, long j, long col) {
        double m = 0.0;
        if (av) m += (*av)[j * c + col];
        if (rv) m += (*rv)[j * c + col] - (*rv)[i * c + col];
        return m;
    };

    std::vector<double> out(static_cast<size_t>(n * c), 0.0);
    // Max pooling remembers which list position won each cell.
    std::vector<long> argpos;
    if (mode == Pooling::Max) argpos.assign(static_cast<size_t>(n * c), 0);
    std::vector<double> vals;
    for (long i = 0; i < n; ++i) {
        const std::vector<long>& js = nbrs.idx[i];
        long k = static_cast<long>(js.size());
        for (long col = 0; col < c; ++col) {
            if (mode == Pooling::Max) {
                double best = term(i, js[0], col);
                long bestpos = 0;
                for (long p = 1; p < k; ++p) {
                    double m = term(i, js[p], col);
                    if (m > best) {
                        best = m;
                        bestpos = p;
                    }
                }
                out[i * c + col] = best;
                argpos[i * c + col] = bestpos;
            } else {
                vals.clear();
                for (long p = 0; p < k; ++p) vals.push_back(term(i, js[p], col));
                std::sort(vals.begin(), vals.end());
                double s = 0.0;
                for (double m : vals) s += m;
                out[i * c + col] = mode == Pooling::Mean ? s / static_cast<double>(k) : s;
            }
        }
    }

    auto ai = A.defined() ? A.impl() : nullptr;
    auto ri = R.defined() ? R.impl() : nullptr;
    auto lists = nbrs.idx;
    return make_op({n, c}, std::move(out), {A, R},
                   [ai, ri, lists = std::move(lists), argpos = std::move(argpos), mode, n,
                    c](TensorImpl& self) {
                       bool ga = ai && ai->requires_grad;
                       bool gr = ri && ri->requires_grad;
                       if (ga) ai->ensure_grad();
                       if (gr) ri->ensure_grad();
                       for (long i = 0; i < n; ++i) {
                           const std::vector<long>& js = lists[i];
                           double kf = static_cast<double>(js.size());
                           for (long col = 0; col < c; ++col) {
                               double g = self.grad[i * c + col];
                               if (g == 0.0) continue;
                               if (mode == Pooling::Max) {
                                   long j = js[argpos[i * c + col]];
                                   if (ga) ai->grad[j * c + col] += g;
                                   if (gr) {
                                       ri->grad[j * c + col] += g;
                                       ri->grad[i * c + col] -= g;
                                   }
                               } else {
                                   double ge = mode == Pooling::Mean ? g / kf : g;
                                   for (long j : js) {
                                       if (ga) ai->grad[j * c + col] += ge;
                                       if (gr) {
                                           ri->grad[j * c + col] += ge;
                                           ri->grad[i * c + col] -= ge;
                                       }
                                   }
                               }
                           }
                       }
                   });
}

Tensor relative_message(const Tensor& X, const NeighborIndex& nbrs, const GraphLayerParams& p,
                        Pooling mode, const GraphConfig& cfg, bool activate) {
    cfg.validate();
    Tensor A, R;
    if (cfg.absolute_enabled) {
        if (!p.W_a.defined()) throw ConfigError("relative_message: W_a missing");
        A = matmul_nt(X, p.W_a);
    }
    if (cfg.relative_enabled) {
        if (!p.W_r.defined()) throw ConfigError("relative_message: W_r missing");
        R = matmul_nt(X, p.W_r);
    }
    Tensor pooled = neighbor_pool(A, R, nbrs, mode);
    return activate ? relu(pooled) : pooled;
}

Tensor spatial_layer(const Tensor& V, long K, const GraphLayerParams& p, const GraphConfig& cfg,
                     std::vector<NeighborIndex>* collect) {
    if (K < 1 || V.rows() % K != 0)
        throw DimError("spatial_layer: " + std::to_string(V.rows()) +
                       " rows do not split into frames of " + std::to_string(K));
    long T = V.rows() / K;
    long k = cfg.k_spatial(K);
    std::vector<Tensor> frames;
    frames.reserve(T);
    for (long t = 0; t < T; ++t) {
        Tensor X = row_range(V, t * K, (t + 1) * K);
        NeighborIndex nbrs = knn_neighbors(X, k);
        if (collect) collect->push_back(nbrs);
        frames.push_back(relative_message(X, nbrs, p, cfg.pooling_spatial, cfg));
    }
    return vstack(frames);
}

Tensor aggregate_frames(const Tensor& S, long K, Pooling mode) {
    if (K < 1 || S.rows() % K != 0)
        throw DimError("aggregate_frames: " + std::to_string(S.rows()) +
                       " rows do not split into frames of " + std::to_string(K));
    long T = S.rows() / K;
    long c = S.cols();
    const std::vector<double>& v = S.value();
    std::vector<double> out(static_cast<size_t>(T * c), 0.0);
    std::vector<long> argrow;
    if (mode == Pooling::Max) argrow.assign(static_cast<size_t>(T * c), 0);
    std::vector<double> vals;
    for (long t = 0; t < T; ++t) {
        for (long col = 0; col < c; ++col) {
            if (mode == Pooling::Max) {
                double best = v[(t * K) * c + col];
                long bestrow = t * K;
                for (long o = 1; o < K; ++o) {
                    double m = v[(t * K + o) * c + col];
                    if (m > best) {
                        best = m;
                        bestrow = t * K + o;
                    }
                }
                out[t * c + col] = best;
                argrow[t * c + col] = bestrow;
            } else {
                vals.clear();
                for (long o = 0; o < K; ++o) vals.push_back(v[(t * K + o) * c + col]);
                std::sort(vals.begin(), vals.end());
                double s = 0.0;
                for (double m : vals) s += m;
                out[t * c + col] = mode == Pooling::Mean ? s / static_cast<double>(K) : s;
            }
        }
    }
    auto si = S.impl();
    return make_op({T, c}, std::move(out), {S},
                   [si, argrow = std::move(argrow), mode, T, K, c](TensorImpl& self) {
                       if (!si->requires_grad) return;
                       si->ensure_grad();
                       for (long t = 0; t < T; ++t) {
                           for (long col = 0; col < c; ++col) {
                               double g = self.grad[t * c + col];
                               if (g == 0.0) continue;
                               if (mode == Pooling::Max) {
                                   si->grad[argrow[t * c + col] * c + col] += g;
                               } else {
                                   double ge =
                                       mode == Pooling::Mean ? g / static_cast<double>(K) : g;
                                   for (long o = 0; o < K; ++o)
                                       si->grad[(t * K + o) * c + col] += ge;
                               }
                           }
                       }
                   });
}

Tensor temporal_layer(const Tensor& F, const GraphLayerParams& p, const GraphConfig& cfg,
                      NeighborIndex* collect) {
    NeighborIndex nbrs = knn_neighbors(F, cfg.k_temporal(F.rows()));
    if (collect) *collect = nbrs;
    return relative_message(F, nbrs, p, cfg.pooling_temporal, cfg);
}

GraphOut run_graphs(const Tensor& V, long K, const GraphLayers& layers, const GraphConfig& cfg,
                    GraphTrace* trace) {
    cfg.validate();
    if (K < 1 || V.rows() % K != 0)
        throw DimError("run_graphs: node rows do not split into frames of " + std::to_string(K));
    if (static_cast<long>(layers.spatial.size()) < cfg.H)
        throw ConfigError("run_graphs: need " + std::to_string(cfg.H) + " spatial layers, have " +
                          std::to_string(layers.spatial.size()));

    GraphOut out;
    if (cfg.disentangled) {
        if (static_cast<long>(layers.temporal.size()) < cfg.H)
            throw ConfigError("run_graphs: need " + std::to_string(cfg.H) +
                              " temporal layers, have " + std::to_string(layers.temporal.size()));
        Tensor S = V;
        for (long h = 0; h < cfg.H; ++h)
            S = spatial_layer(S, K, layers.spatial[h], cfg,
                              h == 0 && trace ? &trace->spatial_frames : nullptr);
        Tensor F = aggregate_frames(S, K, cfg.pooling_aggregation);
        Tensor Tt = F;
        for (long h = 0; h < cfg.H; ++h)
            Tt = temporal_layer(Tt, layers.temporal[h], cfg,
                                h == 0 && trace ? &trace->temporal : nullptr);
        out.S = S;
        out.Tt = Tt;
    } else {
        long k = cfg.k_holistic(V.rows());
        Tensor G = V;
        for (long h = 0; h < cfg.H; ++h) {
            NeighborIndex nbrs = knn_neighbors(G, k);
            if (h == 0 && trace) trace->spatial_frames.push_back(nbrs);
            G = relative_message(G, nbrs, layers.spatial[h], cfg.pooling_spatial, cfg);
        }
        out.S = G;
        out.Tt = aggregate_frames(G, K, cfg.pooling_aggregation);
    }
    return out;
}

}  // namespace krst
