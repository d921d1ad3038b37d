#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "krst/encoder.hpp"
#include "krst/lstm.hpp"
#include "krst/rng.hpp"

using namespace krst;

namespace {

// Reference projection: row r of [O_s | O_p] times W_o^T, plain loops.
std::vector<double> ref_project(const std::vector<double>& os, const std::vector<double>& op,
                                const std::vector<double>& w, long n, long cs, long c) {
    std::vector<double> out(n * c, 0.0);
    long in = cs + 6;
    for (long r = 0; r < n; ++r)
        for (long j = 0; j < c; ++j) {
            double acc = 0.0;
            for (long k = 0; k < cs; ++k) acc += os[r * cs + k] * w[j * in + k];
            for (long k = 0; k < 6; ++k) acc += op[r * 6 + k] * w[j * in + cs + k];
            out[r * c + j] = acc;
        }
    return out;
}

ObjectFeatureBank tiny_bank(long T, long K, long C, uint64_t seed) {
    std::mt19937_64 rng(seed);
    ObjectFeatureBank b;
    b.stream = "appearance";
    b.T = T;
    b.K = K;
    b.I = Tensor::from_data({T, C}, uniform_vector(rng, T * C, -1.0, 1.0));
    b.O_s = Tensor::from_data({T * K, C}, uniform_vector(rng, T * K * C, -1.0, 1.0));
    std::vector<double> boxes;
    std::uniform_real_distribution<double> u(0.1, 0.4);
    for (long r = 0; r < T * K; ++r) {
        double x1 = u(rng), y1 = u(rng), w = u(rng), h = u(rng);
        boxes.insert(boxes.end(), {x1, y1, x1 + w, y1 + h, w, h});
    }
    b.O_p = Tensor::from_data({T * K, 6}, boxes);
    return b;
}

}  // namespace

TEST_CASE("project_objects matches a loop reference and passes through blocks") {
    const long T = 2, K = 3, Cs = 4, C = 4;
    ObjectFeatureBank b = tiny_bank(T, K, Cs, 11);
    std::mt19937_64 rng(12);
    std::vector<double> wv = uniform_vector(rng, C * (Cs + 6), -1.0, 1.0);
    Tensor W = Tensor::from_data({C, Cs + 6}, wv);

    Tensor O = project_objects(b.O_s, b.O_p, W);
    REQUIRE(O.rows() == T * K);
    REQUIRE(O.cols() == C);
    std::vector<double> want = ref_project(b.O_s.value(), b.O_p.value(), wv, T * K, Cs, C);
    for (long i = 0; i < O.numel(); ++i) CHECK(O.value()[i] == doctest::Approx(want[i]).epsilon(1e-12));

    // Identity on the semantic block ignores the boxes entirely.
    std::vector<double> eye(C * (Cs + 6), 0.0);
    for (long j = 0; j < C; ++j) eye[j * (Cs + 6) + j] = 1.0;
    Tensor O2 = project_objects(b.O_s, b.O_p, Tensor::from_data({C, Cs + 6}, eye));
    for (long i = 0; i < O2.numel(); ++i) CHECK(O2.value()[i] == doctest::Approx(b.O_s.value()[i]));

    // Selecting one box column reads it back for every object row.
    std::vector<double> sel(1 * (Cs + 6), 0.0);
    sel[Cs + 2] = 1.0;  // x2
    Tensor O3 = project_objects(b.O_s, b.O_p, Tensor::from_data({1, Cs + 6}, sel));
    for (long r = 0; r < T * K; ++r) CHECK(O3.at(r, 0) == doctest::Approx(b.O_p.at(r, 2)));
}

TEST_CASE("tile_frames repeats each frame row K times in order") {
    Tensor I = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor t = tile_frames(I, 4);
    REQUIRE(t.rows() == 12);
    REQUIRE(t.cols() == 2);
    for (long tt = 0; tt < 3; ++tt)
        for (long k = 0; k < 4; ++k) {
            CHECK(t.at(tt * 4 + k, 0) == I.at(tt, 0));
            CHECK(t.at(tt * 4 + k, 1) == I.at(tt, 1));
        }
}

TEST_CASE("fuse_video_object equals the two-layer reference on concatenated input") {
    const long T = 2, K = 2, C = 3, hid = 4;
    std::mt19937_64 rng(21);
    Tensor O = Tensor::from_data({T * K, C}, uniform_vector(rng, T * K * C, -1.0, 1.0));
    Tensor I = Tensor::from_data({T, C}, uniform_vector(rng, T * C, -1.0, 1.0));
    std::vector<double> w1 = uniform_vector(rng, hid * 2 * C, -0.7, 0.7);
    std::vector<double> b1 = uniform_vector(rng, hid, -0.2, 0.2);
    std::vector<double> w2 = uniform_vector(rng, C * hid, -0.7, 0.7);
    std::vector<double> b2 = uniform_vector(rng, C, -0.2, 0.2);

    Tensor got = fuse_video_object(O, I, K, Tensor::from_data({hid, 2 * C}, w1),
                                   Tensor::from_data({1, hid}, b1),
                                   Tensor::from_data({C, hid}, w2),
                                   Tensor::from_data({1, C}, b2));
    REQUIRE(got.rows() == T * K);
    REQUIRE(got.cols() == C);

    for (long r = 0; r < T * K; ++r) {
        std::vector<double> in(2 * C);
        for (long c = 0; c < C; ++c) {
            in[c] = O.at(r, c);
            in[C + c] = I.at(r / K, c);
        }
        std::vector<double> h(hid);
        for (long j = 0; j < hid; ++j) {
            double acc = b1[j];
            for (long c = 0; c < 2 * C; ++c) acc += in[c] * w1[j * 2 * C + c];
            h[j] = acc > 0 ? acc : 0;
        }
        for (long j = 0; j < C; ++j) {
            double acc = b2[j];
            for (long k = 0; k < hid; ++k) acc += h[k] * w2[j * hid + k];
            CHECK(got.at(r, j) == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("validate_bank rejects broken box identities and row counts") {
    ObjectFeatureBank b = tiny_bank(2, 2, 3, 31);
    CHECK_NOTHROW(validate_bank(b));

    ObjectFeatureBank bad = tiny_bank(2, 2, 3, 31);
    bad.O_p.value()[4] += 0.5;  // w no longer x2 - x1
    CHECK_THROWS_AS(validate_bank(bad), DataError);

    ObjectFeatureBank wrong = tiny_bank(2, 2, 3, 31);
    wrong.K = 3;
    CHECK_THROWS_AS(validate_bank(wrong), DataError);
}

TEST_CASE("check_stream_pair wants matching frame and object layout") {
    ObjectFeatureBank a = tiny_bank(2, 3, 4, 41);
    ObjectFeatureBank m = tiny_bank(2, 3, 4, 42);
    m.stream = "motion";
    CHECK_NOTHROW(check_stream_pair(a, m));
    m.T = 3;
    m.I = Tensor::zeros({3, 4});
    m.O_s = Tensor::zeros({9, 4});
    m.O_p = tiny_bank(3, 3, 4, 43).O_p;
    CHECK_THROWS_AS(check_stream_pair(a, m), DimError);
}

TEST_CASE("encode_question embeds tokens and carries the recurrent summary") {
    const long vocab = 7, ew = 3, hid = 2;
    std::mt19937_64 rng(51);
    ParamStore store;
    BiLstmParams lstm = make_bilstm_params(store, "q", ew, hid, rng);
    Tensor table = Tensor::from_data({vocab, ew}, uniform_vector(rng, vocab * ew, -1.0, 1.0));

    std::vector<long> tokens = {2, 5, 2, 0};
    QuestionEncoding enc = encode_question(tokens, table, lstm);
    REQUIRE(enc.E.rows() == 4);
    REQUIRE(enc.E.cols() == ew);
    for (long l = 0; l < 4; ++l)
        for (long c = 0; c < ew; ++c) CHECK(enc.E.at(l, c) == table.at(tokens[l], c));

    BiLstmOut ref = bilstm_encode(enc.E, lstm);
    REQUIRE(enc.Q_w.rows() == 4);
    REQUIRE(enc.Q_w.cols() == 2 * hid);
    REQUIRE(enc.Q_s.rows() == 1);
    for (long i = 0; i < enc.Q_w.numel(); ++i) CHECK(enc.Q_w.value()[i] == ref.Q_w.value()[i]);
    for (long i = 0; i < enc.Q_s.numel(); ++i) CHECK(enc.Q_s.value()[i] == ref.Q_s.value()[i]);

    CHECK_THROWS_AS(encode_question({}, table, lstm), DataError);
    CHECK_THROWS_AS(encode_question({7}, table, lstm), DataError);
    CHECK_THROWS_AS(encode_question({-1}, table, lstm), DataError);
}

TEST_CASE("tensor files round-trip and truncation is detected") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "krst_enc_test";
    fs::create_directories(dir);
    std::mt19937_64 rng(61);
    Tensor t = Tensor::from_data({3, 5}, uniform_vector(rng, 15, -10.0, 10.0));

    std::string p = (dir / "t.bin").string();
    write_tensor_bin(p, t);
    CHECK(fs::file_size(p) == 8 + 2 * 8 + 15 * 8);
    Tensor back = read_tensor_bin(p);
    REQUIRE(back.shape() == t.shape());
    for (long i = 0; i < 15; ++i) CHECK(back.value()[i] == t.value()[i]);

    fs::resize_file(p, fs::file_size(p) - 9);
    CHECK_THROWS_AS(read_tensor_bin(p), DataError);
    CHECK_THROWS_AS(read_tensor_bin((dir / "missing.bin").string()), DataError);
    fs::remove_all(dir);
}

TEST_CASE("feature banks round-trip through their directory layout") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "krst_bank_test";
    fs::remove_all(dir);
    ObjectFeatureBank b = tiny_bank(3, 2, 4, 71);
    save_feature_bank(dir.string(), b);
    ObjectFeatureBank back = load_feature_bank(dir.string());
    CHECK(back.stream == b.stream);
    CHECK(back.T == b.T);
    CHECK(back.K == b.K);
    for (long i = 0; i < b.I.numel(); ++i) CHECK(back.I.value()[i] == b.I.value()[i]);
    for (long i = 0; i < b.O_s.numel(); ++i) CHECK(back.O_s.value()[i] == b.O_s.value()[i]);
    for (long i = 0; i < b.O_p.numel(); ++i) CHECK(back.O_p.value()[i] == b.O_p.value()[i]);
    fs::remove_all(dir);
}
