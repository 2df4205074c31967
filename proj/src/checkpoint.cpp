#include "tryon/checkpoint.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tryon {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

namespace {

using nlohmann::json;

enum class DtypeCode : uint8_t { Float32 = 1, Float64 = 2, Int64 = 3 };

DtypeCode code_of(torch::ScalarType t) {
    switch (t) {
        case torch::kFloat: return DtypeCode::Float32;
        case torch::kDouble: return DtypeCode::Float64;
        case torch::kLong: return DtypeCode::Int64;
        default: throw CheckpointError(std::string("unsupported tensor dtype ") + c10::toString(t));
    }
}

torch::ScalarType type_of(uint8_t code) {
    switch (static_cast<DtypeCode>(code)) {
        case DtypeCode::Float32: return torch::kFloat;
        case DtypeCode::Float64: return torch::kDouble;
        case DtypeCode::Int64: return torch::kLong;
    }
    throw CheckpointError("unknown dtype code " + std::to_string(code));
}

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}
    template <class T>
    T get() {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }
    const char* take(size_t n) {
        if (n > bytes_.size() - pos_) throw CheckpointError("checkpoint truncated");
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    size_t pos_ = 0;
};

void encode_blob(std::string& out, const std::vector<NamedTensor>& tensors) {
    put<uint64_t>(out, tensors.size());
    for (const auto& [name, value] : tensors) {
        put<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out += name;
        auto t = value.detach().cpu().contiguous();
        put<uint8_t>(out, static_cast<uint8_t>(code_of(t.scalar_type())));
        put<uint32_t>(out, static_cast<uint32_t>(t.dim()));
        for (int64_t d : t.sizes()) put<int64_t>(out, d);
        out.append(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size());
    }
}

std::vector<NamedTensor> decode_blob(Reader& in) {
    const auto count = in.get<uint64_t>();
    std::vector<NamedTensor> out;
    for (uint64_t i = 0; i < count; ++i) {
        const auto len = in.get<uint32_t>();
        std::string name(in.take(len), len);
        const auto dtype = type_of(in.get<uint8_t>());
        const auto rank = in.get<uint32_t>();
        if (rank > 16) throw CheckpointError("implausible tensor rank in checkpoint");
        std::vector<int64_t> dims(rank);
        for (auto& d : dims) {
            d = in.get<int64_t>();
            if (d < 0) throw CheckpointError("negative tensor dimension in checkpoint");
        }
        auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
        const size_t n = static_cast<size_t>(t.numel() * t.element_size());
        std::memcpy(t.data_ptr(), in.take(n), n);
        out.push_back({std::move(name), t});
    }
    return out;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

const torch::Tensor* StageCheckpoint::find_parameter(const std::string& name) const {
    for (const auto& p : parameters) {
        if (p.name == name) return &p.value;
    }
    return nullptr;
}

std::string encode_checkpoint(const StageCheckpoint& ck) {
    const json manifest = {{"format_version", ck.format_version},
                           {"stage", std::string(stage_name(ck.stage))},
                           {"step", ck.step},
                           {"fingerprint", hex64(ck.fingerprint)},
                           {"config", ck.config}};
    const std::string text = manifest.dump();
    std::string out(kCheckpointMagic, 8);
    put<uint64_t>(out, text.size());
    out += text;
    encode_blob(out, ck.parameters);
    encode_blob(out, ck.optimizer);
    return out;
}

StageCheckpoint decode_checkpoint(const std::string& bytes) {
    Reader in(bytes);
    if (std::memcmp(in.take(8), kCheckpointMagic, 8) != 0) throw CheckpointError("not a checkpoint (bad magic)");
    const auto len = in.get<uint64_t>();
    if (len > bytes.size()) throw CheckpointError("checkpoint truncated");
    StageCheckpoint ck;
    try {
        const json m = json::parse(std::string(in.take(len), len));
        ck.format_version = m.at("format_version").get<int>();
        if (ck.format_version != kCheckpointVersion) {
            throw CheckpointError("unsupported checkpoint version " + std::to_string(ck.format_version));
        }
        try {
            ck.stage = parse_stage(m.at("stage").get<std::string>());
        } catch (const ConfigError& e) {
            throw CheckpointError(e.what());
        }
        ck.step = m.at("step").get<int64_t>();
        ck.fingerprint = std::stoull(m.at("fingerprint").get<std::string>(), nullptr, 16);
        ck.config = m.at("config").get<std::string>();
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("bad checkpoint manifest: ") + e.what());
    }
    ck.parameters = decode_blob(in);
    ck.optimizer = decode_blob(in);
    if (!in.done()) throw CheckpointError("trailing bytes after checkpoint");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const StageCheckpoint& ck) {
    const std::string bytes = encode_checkpoint(ck);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing " + path.string());
}

StageCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_checkpoint(ss.str());
}

bool same_checkpoint(const StageCheckpoint& a, const StageCheckpoint& b) {
    return encode_checkpoint(a) == encode_checkpoint(b);
}

}  // namespace tryon
