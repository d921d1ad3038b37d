#include "krst/param_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "krst/rng.hpp"

namespace krst {

Tensor ParamStore::create(const std::string& name, Shape shape, long fan_in,
                          std::mt19937_64& rng) {
    if (fan_in < 1) throw ConfigError("param " + name + ": fan_in must be >= 1");
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    long n = shape_numel(shape);
    return create_raw(name, std::move(shape),
                      uniform_vector(rng, static_cast<size_t>(n), -bound, bound));
}

Tensor ParamStore::create_raw(const std::string& name, Shape shape, std::vector<double> data) {
    if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Tensor t = Tensor::param(std::move(shape), std::move(data));
    params_.emplace(name, t);
    return t;
}

Tensor ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

long ParamStore::total_elements() const {
    long n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : params_) t.clear_grad();
}

void ParamStore::scale_grads(double factor) {
    for (auto& [name, t] : params_) {
        if (!t.has_grad()) continue;
        auto& g = t.impl()->grad;
        for (double& v : g) v *= factor;
    }
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(name);
    return out;
}

namespace {

constexpr char kMagic[5] = {'K', 'R', 'S', 'T', '1'};

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& is, const std::string& path, std::streamoff at) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is)
        throw DataError("checkpoint " + path + ": truncated at offset " + std::to_string(at));
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path,
                     const std::string& config_json) {
    nlohmann::json manifest;
    manifest["dtype"] = "f64";
    manifest["config"] = nlohmann::json::parse(config_json);
    nlohmann::json params = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : store) {
        nlohmann::json p;
        p["name"] = name;
        p["shape"] = t.shape();
        p["offset"] = offset;
        params.push_back(std::move(p));
        offset += static_cast<uint64_t>(t.numel()) * 8;
    }
    manifest["params"] = std::move(params);
    std::string text = manifest.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint " + path);
    os.write(kMagic, 5);
    write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : store) {
        static_assert(sizeof(double) == 8);
        os.write(reinterpret_cast<const char*>(t.value().data()),
                 static_cast<std::streamsize>(t.numel()) * 8);
    }
    if (!os) throw DataError("short write on checkpoint " + path);
}

namespace {

nlohmann::json read_manifest(std::istream& is, const std::string& path, uint64_t* payload_at) {
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, kMagic, 5) != 0)
        throw DataError("checkpoint " + path + ": bad magic at offset 0");
    uint64_t len = read_u64(is, path, 5);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (!is)
        throw DataError("checkpoint " + path + ": manifest truncated at offset 13");
    nlohmann::json manifest = nlohmann::json::parse(text, nullptr, false);
    if (manifest.is_discarded())
        throw DataError("checkpoint " + path + ": manifest is not valid JSON at offset 13");
    if (payload_at) *payload_at = 13 + len;
    return manifest;
}

}  // namespace

std::string load_checkpoint(ParamStore& store, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path);
    uint64_t payload_at = 0;
    nlohmann::json manifest = read_manifest(is, path, &payload_at);

    if (manifest.value("dtype", "") != "f64")
        throw DataError("checkpoint " + path + ": unsupported dtype");
    const auto& params = manifest.at("params");
    if (params.size() != store.size())
        throw DataError("checkpoint " + path + ": has " + std::to_string(params.size()) +
                        " parameters, store expects " + std::to_string(store.size()));
    for (const auto& p : params) {
        std::string name = p.at("name").get<std::string>();
        Shape shape = p.at("shape").get<Shape>();
        uint64_t offset = p.at("offset").get<uint64_t>();
        if (!store.contains(name))
            throw DataError("checkpoint " + path + ": unexpected parameter " + name);
        Tensor t = store.get(name);
        if (t.shape() != shape)
            throw DataError("checkpoint " + path + ": shape mismatch for " + name + ", file " +
                            shape_str(shape) + " vs store " + shape_str(t.shape()));
        is.seekg(static_cast<std::streamoff>(payload_at + offset));
        is.read(reinterpret_cast<char*>(t.value().data()),
                static_cast<std::streamsize>(t.numel()) * 8);
        if (!is)
            throw DataError("checkpoint " + path + ": payload truncated at offset " +
                            std::to_string(payload_at + offset));
    }
    return manifest.at("config").dump();
}

std::string read_checkpoint_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path);
    nlohmann::json manifest = read_manifest(is, path, nullptr);
    return manifest.at("config").dump();
}

}  // namespace krst
