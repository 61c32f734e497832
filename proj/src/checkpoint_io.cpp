#include "trec/checkpoint_io.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>

#include "trec/dataset.hpp"

namespace trec {

namespace {

constexpr uint32_t kVersion = 1;

uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

void append(std::string& out, const void* p, size_t n) {
    out.append(static_cast<const char*>(p), n);
}

template <class T>
void put(std::string& out, T v) {
    append(out, &v, sizeof(T));
}

// spec constants serialized as one f32 tensor so load can verify identity
std::vector<float> spec_to_floats(const ModelSpec& s) {
    std::vector<float> v;
    v.push_back(static_cast<float>(s.grid_dim));
    v.push_back(s.cell_size);
    for (int w : s.widths) v.push_back(static_cast<float>(w));
    for (const Kernel4* k :
         {&s.enc_normal_kernel, &s.enc_strided_kernel, &s.dec_normal_kernel,
          &s.dec_strided_kernel, &s.down_stride}) {
        for (int x : *k) v.push_back(static_cast<float>(x));
    }
    v.push_back(s.alpha);
    return v;
}

}  // namespace

void write_checkpoint_tensors(const std::filesystem::path& path,
                              const std::vector<CheckpointTensor>& tensors) {
    std::string out;
    append(out, "TCKP", 4);
    put<uint32_t>(out, kVersion);
    put<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (const CheckpointTensor& t : tensors) {
        TREC_CHECK(t.name.size() <= UINT16_MAX, "tensor name too long");
        put<uint16_t>(out, static_cast<uint16_t>(t.name.size()));
        append(out, t.name.data(), t.name.size());
        put<uint8_t>(out, 0);  // dtype f32
        put<uint8_t>(out, static_cast<uint8_t>(t.dims.size()));
        uint64_t count = 1;
        for (uint32_t d : t.dims) {
            put<uint32_t>(out, d);
            count *= d;
        }
        TREC_CHECK(count == t.data.size(), "tensor payload size does not match dims");
        append(out, t.data.data(), t.data.size() * sizeof(float));
    }
    put<uint64_t>(out, fnv1a(out));
    atomic_write_file(path, out);
}

std::vector<CheckpointTensor> read_checkpoint_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), 0, "cannot open file");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    auto fail = [&path](uint64_t off, const std::string& what) -> IoError {
        return IoError(path.string(), off, what);
    };
    if (data.size() < 20) throw fail(0, "file too small");

    uint64_t stored_hash = 0;
    std::memcpy(&stored_hash, data.data() + data.size() - 8, 8);
    const std::string body = data.substr(0, data.size() - 8);
    if (fnv1a(body) != stored_hash) {
        throw fail(data.size() - 8, "content hash mismatch");
    }

    uint64_t off = 0;
    auto take = [&](void* p, size_t n, const char* what) {
        if (off + n > body.size()) throw fail(off, std::string("truncated ") + what);
        std::memcpy(p, body.data() + off, n);
        off += n;
    };

    char magic[4];
    take(magic, 4, "magic");
    if (std::string(magic, 4) != "TCKP") throw fail(0, "bad magic, expected TCKP");
    uint32_t version = 0;
    take(&version, 4, "version");
    if (version != kVersion) throw fail(4, "unsupported version " + std::to_string(version));
    uint32_t n_tensors = 0;
    take(&n_tensors, 4, "tensor count");

    std::vector<CheckpointTensor> tensors;
    tensors.reserve(n_tensors);
    for (uint32_t i = 0; i < n_tensors; ++i) {
        CheckpointTensor t;
        uint16_t name_len = 0;
        take(&name_len, 2, "name length");
        t.name.resize(name_len);
        take(t.name.data(), name_len, "name");
        uint8_t dtype = 0, ndim = 0;
        take(&dtype, 1, "dtype");
        if (dtype != 0) throw fail(off - 1, "unsupported dtype");
        take(&ndim, 1, "ndim");
        t.dims.resize(ndim);
        uint64_t count = 1;
        for (uint8_t d = 0; d < ndim; ++d) {
            take(&t.dims[d], 4, "dim");
            count *= t.dims[d];
        }
        t.data.resize(count);
        take(t.data.data(), count * sizeof(float), "payload");
        tensors.push_back(std::move(t));
    }
    if (off != body.size()) throw fail(off, "trailing bytes");
    return tensors;
}

void save_model(const std::filesystem::path& path, Model& model,
                const nn::Adam<float>* optimizer) {
    std::vector<CheckpointTensor> tensors;

    CheckpointTensor spec;
    spec.name = "meta.spec";
    std::vector<float> sv = spec_to_floats(model.spec());
    spec.dims = {static_cast<uint32_t>(sv.size())};
    spec.data = std::move(sv);
    tensors.push_back(std::move(spec));

    for (auto& [name, mat] : model.named_state()) {
        CheckpointTensor t;
        t.name = name;
        t.dims = {static_cast<uint32_t>(mat->rows()), static_cast<uint32_t>(mat->cols())};
        t.data.assign(mat->data(), mat->data() + mat->size());
        tensors.push_back(std::move(t));
    }

    if (optimizer) {
        CheckpointTensor step;
        step.name = "opt.step";
        step.dims = {1};
        step.data = {static_cast<float>(optimizer->step_count())};
        tensors.push_back(std::move(step));
        auto& m = const_cast<nn::Adam<float>*>(optimizer)->first_moments();
        auto& v = const_cast<nn::Adam<float>*>(optimizer)->second_moments();
        for (size_t i = 0; i < m.size(); ++i) {
            for (auto [tag, mat] : {std::pair{"m", &m[i]}, std::pair{"v", &v[i]}}) {
                CheckpointTensor t;
                t.name = "opt." + std::string(tag) + "." + std::to_string(i);
                t.dims = {static_cast<uint32_t>(mat->rows()),
                          static_cast<uint32_t>(mat->cols())};
                t.data.assign(mat->data(), mat->data() + mat->size());
                tensors.push_back(std::move(t));
            }
        }
    }

    write_checkpoint_tensors(path, tensors);
}

void load_model(const std::filesystem::path& path, Model& model, nn::Adam<float>* optimizer) {
    const std::vector<CheckpointTensor> tensors = read_checkpoint_tensors(path);
    std::unordered_map<std::string, const CheckpointTensor*> by_name;
    for (const CheckpointTensor& t : tensors) by_name[t.name] = &t;

    auto it = by_name.find("meta.spec");
    TREC_CHECK(it != by_name.end(), "checkpoint is missing meta.spec");
    const std::vector<float> expect = spec_to_floats(model.spec());
    TREC_CHECK(it->second->data == expect,
               "checkpoint spec does not match the model spec");

    for (auto& [name, mat] : model.named_state()) {
        auto found = by_name.find(name);
        TREC_CHECK(found != by_name.end(), "checkpoint is missing tensor " + name);
        const CheckpointTensor& t = *found->second;
        TREC_CHECK(t.dims.size() == 2 && t.dims[0] == static_cast<uint32_t>(mat->rows()) &&
                       t.dims[1] == static_cast<uint32_t>(mat->cols()),
                   "tensor shape mismatch for " + name);
        std::memcpy(mat->data(), t.data.data(), t.data.size() * sizeof(float));
    }

    if (optimizer) {
        auto step = by_name.find("opt.step");
        if (step != by_name.end()) {
            optimizer->set_step_count(static_cast<int64_t>(step->second->data[0]));
            auto& m = optimizer->first_moments();
            auto& v = optimizer->second_moments();
            for (size_t i = 0; i < m.size(); ++i) {
                for (auto [tag, mat] : {std::pair{"m", &m[i]}, std::pair{"v", &v[i]}}) {
                    auto f = by_name.find("opt." + std::string(tag) + "." + std::to_string(i));
                    TREC_CHECK(f != by_name.end(), "checkpoint is missing optimizer state");
                    TREC_CHECK(static_cast<Eigen::Index>(f->second->data.size()) == mat->size(),
                               "optimizer state size mismatch");
                    std::memcpy(mat->data(), f->second->data.data(),
                                f->second->data.size() * sizeof(float));
                }
            }
        }
    }
}

ModelSpec peek_checkpoint_spec(const std::filesystem::path& path) {
    const std::vector<CheckpointTensor> tensors = read_checkpoint_tensors(path);
    for (const CheckpointTensor& t : tensors) {
        if (t.name != "meta.spec") continue;
        TREC_CHECK(t.data.size() >= 8, "meta.spec too short");
        ModelSpec s;
        size_t i = 0;
        s.grid_dim = static_cast<int>(t.data[i++]);
        s.cell_size = t.data[i++];
        for (int& w : s.widths) w = static_cast<int>(t.data[i++]);
        for (Kernel4* k : {&s.enc_normal_kernel, &s.enc_strided_kernel, &s.dec_normal_kernel,
                           &s.dec_strided_kernel, &s.down_stride}) {
            for (int32_t& x : *k) x = static_cast<int32_t>(t.data[i++]);
        }
        s.alpha = t.data[i++];
        return s;
    }
    throw IoError(path.string(), 0, "checkpoint is missing meta.spec");
}

}  // namespace trec
