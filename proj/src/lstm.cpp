#include "krst/lstm.hpp"

namespace krst {

namespace {

LstmParams make_dir(ParamStore& store, const std::string& prefix, long input, long hidden,
                    std::mt19937_64& rng) {
    LstmParams p;
    p.hidden = hidden;
    // Effective fan of a third keeps the per-step rms gain near one.
    p.W_ih = store.create(prefix + ".W_ih", {4 * hidden, input}, std::max<long>(1, input / 3),
                          rng);
    p.W_hh = store.create(prefix + ".W_hh", {4 * hidden, hidden},
                          std::max<long>(1, hidden / 3), rng);
    std::vector<double> bias(static_cast<size_t>(4 * hidden), 0.0);
    for (long i = hidden; i < 2 * hidden; ++i) bias[i] = 1.0;  // forget gate
    p.b = store.create_raw(prefix + ".b", {1, 4 * hidden}, std::move(bias));
    return p;
}

LstmParams bind_dir(const ParamStore& store, const std::string& prefix, long hidden) {
    LstmParams p;
    p.hidden = hidden;
    p.W_ih = store.get(prefix + ".W_ih");
    p.W_hh = store.get(prefix + ".W_hh");
    p.b = store.get(prefix + ".b");
    return p;
}

// One direction of the scan; steps lists row indices in processing order.
// Returns per-step hidden states indexed by position in `steps`.
std::vector<Tensor> lstm_scan(const Tensor& E, const LstmParams& p,
                              const std::vector<long>& steps) {
    long h = p.hidden;
    Tensor hidden = Tensor::zeros({1, h});
    Tensor cell = Tensor::zeros({1, h});
    std::vector<Tensor> out;
    out.reserve(steps.size());
    for (long t : steps) {
        Tensor x = row_range(E, t, t + 1);
        Tensor z = add(add_rowvec(matmul_nt(x, p.W_ih), p.b), matmul_nt(hidden, p.W_hh));
        Tensor gi = sigmoid(col_range(z, 0, h));
        Tensor gf = sigmoid(col_range(z, h, 2 * h));
        Tensor gc = tanh_t(col_range(z, 2 * h, 3 * h));
        Tensor go = sigmoid(col_range(z, 3 * h, 4 * h));
        cell = add(mul(gf, cell), mul(gi, gc));
        hidden = mul(go, tanh_t(cell));
        out.push_back(hidden);
    }
    return out;
}

}  // namespace

BiLstmParams make_bilstm_params(ParamStore& store, const std::string& prefix, long input,
                                long hidden_per_dir, std::mt19937_64& rng) {
    if (hidden_per_dir < 1) throw ConfigError("bilstm: hidden width must be >= 1");
    BiLstmParams p;
    p.fwd = make_dir(store, prefix + ".fwd", input, hidden_per_dir, rng);
    p.bwd = make_dir(store, prefix + ".bwd", input, hidden_per_dir, rng);
    return p;
}

BiLstmParams bind_bilstm_params(const ParamStore& store, const std::string& prefix,
                                long hidden_per_dir) {
    BiLstmParams p;
    p.fwd = bind_dir(store, prefix + ".fwd", hidden_per_dir);
    p.bwd = bind_dir(store, prefix + ".bwd", hidden_per_dir);
    return p;
}

BiLstmOut bilstm_encode(const Tensor& E, const BiLstmParams& params) {
    if (E.rank() != 2 || E.rows() == 0) throw DimError("bilstm_encode: empty sequence");
    long L = E.rows();
    std::vector<long> fwd_steps(L), bwd_steps(L);
    for (long t = 0; t < L; ++t) {
        fwd_steps[t] = t;
        bwd_steps[t] = L - 1 - t;
    }
    std::vector<Tensor> hf = lstm_scan(E, params.fwd, fwd_steps);
    std::vector<Tensor> hb = lstm_scan(E, params.bwd, bwd_steps);

    std::vector<Tensor> rows;
    rows.reserve(L);
    for (long t = 0; t < L; ++t) rows.push_back(concat(hf[t], hb[L - 1 - t], 1));
    BiLstmOut out;
    out.Q_w = vstack(rows);
    out.Q_s = concat(hf[L - 1], hb[L - 1], 1);
    return out;
}

}  // namespace krst
