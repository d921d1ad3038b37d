#pragma once

#include <string>
#include <vector>

#include "krst/lstm.hpp"
#include "krst/ops.hpp"

namespace krst {

// Per-video features for one stream. Row t*K + k of O_s / O_p belongs to
// object k of frame t. O_p columns are (x1, y1, x2, y2, w, h) in [0,1]
// frame-normalized coordinates.
struct ObjectFeatureBank {
    std::string stream;  // "appearance" or "motion"
    long T = 0;
    long K = 0;
    Tensor I;    // T x C
    Tensor O_s;  // T*K x C_s
    Tensor O_p;  // T*K x 6
};

// Checks row bookkeeping and the box identities (x2 >= x1, y2 >= y1,
// w == x2-x1, h == y2-y1 within 1e-9).
void validate_bank(const ObjectFeatureBank& bank);

// Both streams of one video must agree on the frame/object layout.
void check_stream_pair(const ObjectFeatureBank& a, const ObjectFeatureBank& b);

// O = [O_s, O_p] * W_o^T, one projected row per object. W_o: C x (C_s+6).
Tensor project_objects(const Tensor& O_s, const Tensor& O_p, const Tensor& W_o);

// Repeats frame t's video feature for each of its K objects.
Tensor tile_frames(const Tensor& I, long K);

// O_hat = mlp2([O, tile(I)]); K ties the object rows back to frames.
Tensor fuse_video_object(const Tensor& O, const Tensor& I, long K, const Tensor& W1,
                         const Tensor& b1, const Tensor& W2, const Tensor& b2);

struct QuestionEncoding {
    std::vector<long> tokens;
    Tensor E;    // L x embed width
    Tensor Q_w;  // L x C_w
    Tensor Q_s;  // 1 x C_w
};

QuestionEncoding encode_question(const std::vector<long>& tokens, const Tensor& embedding,
                                 const BiLstmParams& lstm);

// Flat binary tensor files: u64 little-endian rank, then one u64 extent per
// axis, then the row-major float64 payload.
void write_tensor_bin(const std::string& path, const Tensor& t);
Tensor read_tensor_bin(const std::string& path);

// Directory layout per stream: I.bin, O_s.bin, O_p.bin, meta.json.
void save_feature_bank(const std::string& dir, const ObjectFeatureBank& bank);
ObjectFeatureBank load_feature_bank(const std::string& dir);

}  // namespace krst
