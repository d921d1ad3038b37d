#include "krst/encoder.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace krst {

void validate_bank(const ObjectFeatureBank& bank) {
    if (bank.T < 1 || bank.K < 1)
        throw DataError("feature bank: T and K must be >= 1, got T=" + std::to_string(bank.T) +
                        " K=" + std::to_string(bank.K));
    if (bank.I.rank() != 2 || bank.I.rows() != bank.T)
        throw DataError("feature bank: I must have one row per frame");
    long n = bank.T * bank.K;
    if (bank.O_s.rank() != 2 || bank.O_s.rows() != n)
        throw DataError("feature bank: O_s must have T*K rows");
    if (bank.O_p.rank() != 2 || bank.O_p.rows() != n || bank.O_p.cols() != 6)
        throw DataError("feature bank: O_p must be T*K x 6");
    for (long r = 0; r < n; ++r) {
        double x1 = bank.O_p.at(r, 0), y1 = bank.O_p.at(r, 1);
        double x2 = bank.O_p.at(r, 2), y2 = bank.O_p.at(r, 3);
        double w = bank.O_p.at(r, 4), h = bank.O_p.at(r, 5);
        if (x2 < x1 || y2 < y1)
            throw DataError("feature bank: degenerate box at row " + std::to_string(r));
        if (std::fabs(w - (x2 - x1)) > 1e-9 || std::fabs(h - (y2 - y1)) > 1e-9)
            throw DataError("feature bank: box extent mismatch at row " + std::to_string(r));
    }
}

void check_stream_pair(const ObjectFeatureBank& a, const ObjectFeatureBank& b) {
    if (a.T != b.T || a.K != b.K)
        throw DimError("stream pair disagrees on layout: T " + std::to_string(a.T) + " vs " +
                       std::to_string(b.T) + ", K " + std::to_string(a.K) + " vs " +
                       std::to_string(b.K));
}

Tensor project_objects(const Tensor& O_s, const Tensor& O_p, const Tensor& W_o) {
    if (O_s.rows() != O_p.rows())
        throw DimError("project_objects: O_s and O_p row counts differ");
    if (W_o.cols() != O_s.cols() + O_p.cols())
        throw DimError("project_objects: W_o width " + std::to_string(W_o.cols()) +
                       " != " + std::to_string(O_s.cols() + O_p.cols()));
    return matmul_nt(concat(O_s, O_p, 1), W_o);
}

Tensor tile_frames(const Tensor& I, long K) {
    if (K < 1) throw DimError("tile_frames: K must be >= 1");
    return repeat_rows(I, K);
}

Tensor fuse_video_object(const Tensor& O, const Tensor& I, long K, const Tensor& W1,
                         const Tensor& b1, const Tensor& W2, const Tensor& b2) {
    if (O.rows() != I.rows() * K)
        throw DimError("fuse_video_object: object rows " + std::to_string(O.rows()) +
                       " != frames*K = " + std::to_string(I.rows() * K));
    return mlp2(concat(O, tile_frames(I, K), 1), W1, b1, W2, b2);
}

QuestionEncoding encode_question(const std::vector<long>& tokens, const Tensor& embedding,
                                 const BiLstmParams& lstm) {
    if (tokens.empty()) throw DataError("encode_question: empty token sequence");
    for (long id : tokens)
        if (id < 0 || id >= embedding.rows())
            throw DataError("encode_question: token id " + std::to_string(id) +
                            " outside vocabulary of " + std::to_string(embedding.rows()));
    QuestionEncoding out;
    out.tokens = tokens;
    out.E = gather_rows(embedding, tokens);
    BiLstmOut enc = bilstm_encode(out.E, lstm);
    out.Q_w = enc.Q_w;
    out.Q_s = enc.Q_s;
    return out;
}

namespace {

void put_u64(std::ofstream& f, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    f.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t take_u64(std::ifstream& f, const std::string& path) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw DataError(path + ": truncated header");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void write_tensor_bin(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    put_u64(f, static_cast<uint64_t>(t.rank()));
    for (long e : t.shape()) put_u64(f, static_cast<uint64_t>(e));
    static_assert(sizeof(double) == 8);
    f.write(reinterpret_cast<const char*>(t.value().data()),
            static_cast<std::streamsize>(t.value().size() * 8));
    if (!f) throw DataError("short write to " + path);
}

Tensor read_tensor_bin(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    uint64_t rank = take_u64(f, path);
    if (rank > 8) throw DataError(path + ": implausible rank " + std::to_string(rank));
    Shape shape;
    uint64_t n = 1;
    for (uint64_t i = 0; i < rank; ++i) {
        uint64_t e = take_u64(f, path);
        if (e > (1ULL << 32)) throw DataError(path + ": implausible extent");
        shape.push_back(static_cast<long>(e));
        n *= e;
    }
    std::vector<double> data(n);
    f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * 8));
    if (static_cast<uint64_t>(f.gcount()) != n * 8)
        throw DataError(path + ": truncated payload, wanted " + std::to_string(n * 8) +
                        " bytes at offset " + std::to_string(8 + 8 * rank));
    return Tensor::from_data(std::move(shape), std::move(data));
}

void save_feature_bank(const std::string& dir, const ObjectFeatureBank& bank) {
    std::filesystem::create_directories(dir);
    write_tensor_bin(dir + "/I.bin", bank.I);
    write_tensor_bin(dir + "/O_s.bin", bank.O_s);
    write_tensor_bin(dir + "/O_p.bin", bank.O_p);
    nlohmann::json meta;
    meta["T"] = bank.T;
    meta["K"] = bank.K;
    meta["C"] = bank.I.cols();
    meta["C_s"] = bank.O_s.cols();
    meta["stream"] = bank.stream;
    std::ofstream f(dir + "/meta.json", std::ios::trunc);
    f << meta.dump(2) << "\n";
    if (!f) throw DataError("cannot write " + dir + "/meta.json");
}

ObjectFeatureBank load_feature_bank(const std::string& dir) {
    std::ifstream f(dir + "/meta.json");
    if (!f) throw DataError("cannot open " + dir + "/meta.json");
    nlohmann::json meta;
    try {
        f >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir + "/meta.json: " + e.what());
    }
    ObjectFeatureBank bank;
    bank.T = meta.at("T").get<long>();
    bank.K = meta.at("K").get<long>();
    bank.stream = meta.at("stream").get<std::string>();
    bank.I = read_tensor_bin(dir + "/I.bin");
    bank.O_s = read_tensor_bin(dir + "/O_s.bin");
    bank.O_p = read_tensor_bin(dir + "/O_p.bin");
    if (bank.I.cols() != meta.at("C").get<long>() || bank.O_s.cols() != meta.at("C_s").get<long>())
        throw DataError(dir + ": meta.json widths disagree with tensors");
    validate_bank(bank);
    return bank;
}

}  // namespace krst
