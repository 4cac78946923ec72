#include "advlog/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace advlog {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'L', 'O', 'G', 'C', 'K'};
constexpr uint8_t kDtypeF64 = 0;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw BadFormatError("checkpoint truncated");
    return v;
}
uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw BadFormatError("checkpoint truncated");
    return v;
}

struct ArrayRecord {
    std::string name;
    std::vector<size_t> shape;
    std::vector<double> values;
};

void write_array(std::ostream& os, const std::string& name, const std::vector<size_t>& shape,
                 const std::vector<double>& values) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(kDtypeF64));
    write_u32(os, static_cast<uint32_t>(shape.size()));
    for (size_t d : shape) write_u64(os, d);
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
}

ArrayRecord read_array(std::istream& is) {
    ArrayRecord rec;
    uint32_t name_len = read_u32(is);
    if (name_len > 4096) throw BadFormatError("checkpoint array name too long");
    rec.name.resize(name_len);
    is.read(rec.name.data(), name_len);
    int dtype = is.get();
    if (!is) throw BadFormatError("checkpoint truncated");
    if (dtype != kDtypeF64) throw BadFormatError("unknown dtype code");
    uint32_t rank = read_u32(is);
    if (rank > 8) throw BadFormatError("checkpoint array rank too large");
    size_t n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        uint64_t d = read_u64(is);
        rec.shape.push_back(static_cast<size_t>(d));
        n *= static_cast<size_t>(d);
    }
    rec.values.resize(n);
    is.read(reinterpret_cast<char*>(rec.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw BadFormatError("checkpoint truncated");
    return rec;
}

void write_file(const std::string& path, const json& meta, const std::vector<tc::Tensor>& params,
                const std::vector<std::string>& names, const tc::Adam& adam) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write(kMagic, 8);
    write_u32(os, kCheckpointVersion);
    std::string meta_str = meta.dump();
    write_u64(os, meta_str.size());
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

    auto mv = adam.export_state(params);
    write_u32(os, static_cast<uint32_t>(params.size() * 3));
    for (size_t i = 0; i < params.size(); ++i) {
        write_array(os, names[i], params[i]->shape, params[i]->val);
        write_array(os, "adam.m." + names[i], params[i]->shape, mv[i].first);
        write_array(os, "adam.v." + names[i], params[i]->shape, mv[i].second);
    }
    if (!os) throw std::runtime_error("write failed for " + path);
}

json read_header(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw BadFormatError("bad checkpoint magic");
    uint32_t version = read_u32(is);
    if (version != kCheckpointVersion)
        throw VersionMismatchError("checkpoint version " + std::to_string(version) +
                                   ", expected " + std::to_string(kCheckpointVersion));
    uint64_t len = read_u64(is);
    if (len > (1ULL << 30)) throw BadFormatError("metadata block too large");
    std::string meta_str(len, '\0');
    is.read(meta_str.data(), static_cast<std::streamsize>(len));
    if (!is) throw BadFormatError("checkpoint truncated");
    try {
        return json::parse(meta_str);
    } catch (const json::exception&) {
        throw BadFormatError("checkpoint metadata is not valid JSON");
    }
}

// Restores params + optimizer state from the array records.
void load_arrays(std::istream& is, std::vector<tc::Tensor>& params,
                 const std::vector<std::string>& names, tc::Adam& adam, uint64_t adam_t) {
    uint32_t n_arrays = read_u32(is);
    std::vector<ArrayRecord> records;
    records.reserve(n_arrays);
    for (uint32_t i = 0; i < n_arrays; ++i) records.push_back(read_array(is));

    auto find = [&](const std::string& name) -> const ArrayRecord& {
        for (const auto& r : records)
            if (r.name == name) return r;
        throw BadFormatError("checkpoint missing array: " + name);
    };
    std::vector<std::pair<std::vector<double>, std::vector<double>>> mv;
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& rec = find(names[i]);
        if (rec.shape != params[i]->shape)
            throw BadFormatError("checkpoint shape mismatch for " + names[i]);
        params[i]->val = rec.values;
        mv.emplace_back(find("adam.m." + names[i]).values, find("adam.v." + names[i]).values);
        if (mv.back().first.size() != params[i]->size() ||
            mv.back().second.size() != params[i]->size())
            throw BadFormatError("checkpoint optimizer state mismatch for " + names[i]);
    }
    adam.import_state(params, adam_t, mv);
}

Vocab vocab_from_meta(const json& meta) {
    auto tokens = meta.at("vocab").get<std::vector<std::string>>();
    if (tokens.size() < 3 || tokens[0] != Vocab::kSolText || tokens[1] != Vocab::kEolText ||
        tokens[2] != Vocab::kOovText)
        throw BadFormatError("checkpoint vocab missing reserved tokens");
    return Vocab(std::vector<std::string>(tokens.begin() + 3, tokens.end()),
                 meta.at("vocab_min_count").get<size_t>());
}

}  // namespace

void save_detector(const Detector& model, const std::string& path, const std::string& rng_state) {
    const auto& c = model.config();
    json meta = {
        {"kind", "detector"},
        {"config",
         {{"heads", c.heads},
          {"layers", c.layers},
          {"model_dim", c.model_dim},
          {"ff_dim", c.ff_dim},
          {"dropout_p", c.dropout_p},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size}}},
        {"vocab", model.vocab().tokens()},
        {"vocab_min_count", model.vocab().min_count()},
        {"adam_t", const_cast<Detector&>(model).optimizer().step_count()},
        {"rng_state", rng_state},
    };
    write_file(path, meta, model.params(), model.param_names(),
               const_cast<Detector&>(model).optimizer());
}

std::unique_ptr<Detector> load_detector(const std::string& path, std::string* rng_state) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    json meta = read_header(is);
    if (meta.at("kind") != "detector") throw BadFormatError("checkpoint is not a detector");
    const auto& jc = meta.at("config");
    DetectorConfig c;
    c.heads = jc.at("heads");
    c.layers = jc.at("layers");
    c.model_dim = jc.at("model_dim");
    c.ff_dim = jc.at("ff_dim");
    c.dropout_p = jc.at("dropout_p");
    c.lr = jc.at("lr");
    c.epochs = jc.at("epochs");
    c.batch_size = jc.at("batch_size");
    auto model = std::make_unique<Detector>(c, vocab_from_meta(meta), 0);
    load_arrays(is, model->params(), model->param_names(), model->optimizer(),
                meta.value("adam_t", uint64_t{0}));
    if (rng_state) *rng_state = meta.value("rng_state", "");
    return model;
}

void save_generator(const Generator& model, const std::string& path, const std::string& rng_state) {
    const auto& c = model.config();
    json meta = {
        {"kind", "generator"},
        {"config",
         {{"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim},
          {"dropout_p", c.dropout_p},
          {"max_len", c.max_len},
          {"lr", c.lr},
          {"max_epochs", c.max_epochs},
          {"train_split", c.train_split}}},
        {"vocab", model.vocab().tokens()},
        {"vocab_min_count", model.vocab().min_count()},
        {"adam_t", const_cast<Generator&>(model).optimizer().step_count()},
        {"rng_state", rng_state},
    };
    write_file(path, meta, model.params(), model.param_names(),
               const_cast<Generator&>(model).optimizer());
}

std::unique_ptr<Generator> load_generator(const std::string& path, std::string* rng_state) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    json meta = read_header(is);
    if (meta.at("kind") != "generator") throw BadFormatError("checkpoint is not a generator");
    const auto& jc = meta.at("config");
    GeneratorConfig c;
    c.embed_dim = jc.at("embed_dim");
    c.hidden_dim = jc.at("hidden_dim");
    c.dropout_p = jc.at("dropout_p");
    c.max_len = jc.at("max_len");
    c.lr = jc.at("lr");
    c.max_epochs = jc.at("max_epochs");
    c.train_split = jc.at("train_split");
    auto model = std::make_unique<Generator>(c, vocab_from_meta(meta), 0);
    load_arrays(is, model->params(), model->param_names(), model->optimizer(),
                meta.value("adam_t", uint64_t{0}));
    if (rng_state) *rng_state = meta.value("rng_state", "");
    return model;
}

std::string checkpoint_kind(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_header(is).at("kind").get<std::string>();
}

}  // namespace advlog
