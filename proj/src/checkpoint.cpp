#include "adnet/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace adnet {

namespace {

constexpr char kMagic[4] = {'A', 'D', 'N', 'W'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put_f32(std::vector<uint8_t>& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

struct Reader {
    const std::vector<uint8_t>& b;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        if (pos + n > b.size())
            throw std::runtime_error("checkpoint '" + path + "' truncated at byte " +
                                     std::to_string(pos));
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(b[pos + size_t(i)]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(b[pos + size_t(i)]) << (8 * i);
        pos += 8;
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b.data() + pos), n);
        pos += n;
        return s;
    }
};

// Every serialized (name, tensor) pair for a network, in topology order.
std::vector<std::pair<std::string, const Tensor*>> entry_list(const Network& net) {
    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (const Network::Layer& layer : net.layers()) {
        if (!layer.weights.empty()) {
            const char* suffix = layer.weights.ndim() == 4 ? ".filters" : ".weights";
            entries.emplace_back(layer.spec.name + suffix, &layer.weights);
        }
        if (layer.spec.kind == LayerKind::BatchNorm) {
            entries.emplace_back(layer.spec.name + ".gamma", &layer.bn.gamma);
            entries.emplace_back(layer.spec.name + ".beta", &layer.bn.beta);
            entries.emplace_back(layer.spec.name + ".running_mean", &layer.bn.running_mean);
            entries.emplace_back(layer.spec.name + ".running_var", &layer.bn.running_var);
        }
    }
    return entries;
}

} // namespace

uint32_t crc32_ieee(const uint8_t* data, size_t n, uint32_t seed) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

void save_checkpoint(const std::string& path, const Network& net) {
    const auto entries = entry_list(net);

    std::vector<uint8_t> payload;
    std::vector<uint8_t> header;
    header.insert(header.end(), kMagic, kMagic + 4);
    put_u32(header, kCheckpointVersion);
    put_u32(header, uint32_t(entries.size()));
    for (const auto& [name, tensor] : entries) {
        put_u32(header, uint32_t(name.size()));
        header.insert(header.end(), name.begin(), name.end());
        put_u32(header, uint32_t(tensor->ndim()));
        for (int d = 0; d < tensor->ndim(); ++d) put_u32(header, uint32_t(tensor->dim(d)));
        put_u64(header, uint64_t(payload.size()));
        for (int64_t i = 0; i < tensor->size(); ++i) put_f32(payload, (*tensor)[i]);
    }
    put_u64(header, uint64_t(payload.size()));

    std::vector<uint8_t> bytes = std::move(header);
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    put_u32(bytes, crc32_ieee(bytes.data(), bytes.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("write failed for checkpoint '" + path + "'");
}

std::vector<std::pair<std::string, Tensor>> read_checkpoint_entries(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 16) throw std::runtime_error("checkpoint '" + path + "' too small");

    const uint32_t stored_crc = uint32_t(bytes[bytes.size() - 4]) |
                                (uint32_t(bytes[bytes.size() - 3]) << 8) |
                                (uint32_t(bytes[bytes.size() - 2]) << 16) |
                                (uint32_t(bytes[bytes.size() - 1]) << 24);
    if (crc32_ieee(bytes.data(), bytes.size() - 4) != stored_crc)
        throw std::runtime_error("checkpoint '" + path + "' failed checksum validation");

    Reader r{bytes, 0, path};
    if (r.str(4) != std::string(kMagic, 4))
        throw std::runtime_error("checkpoint '" + path + "' has wrong magic (want ADNW)");
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint '" + path + "' has unsupported version " +
                                 std::to_string(version));
    const uint32_t count = r.u32();

    struct RawEntry {
        std::string name;
        std::vector<int> shape;
        uint64_t offset;
    };
    std::vector<RawEntry> raw;
    raw.reserve(count);
    for (uint32_t e = 0; e < count; ++e) {
        RawEntry re;
        re.name = r.str(r.u32());
        const uint32_t ndim = r.u32();
        if (ndim < 1 || ndim > 8)
            throw std::runtime_error("checkpoint '" + path + "' entry '" + re.name +
                                     "' has invalid rank");
        for (uint32_t d = 0; d < ndim; ++d) re.shape.push_back(int(r.u32()));
        re.offset = r.u64();
        raw.push_back(std::move(re));
    }
    const uint64_t payload_size = r.u64();
    r.need(size_t(payload_size));
    const size_t payload_start = r.pos;

    std::vector<std::pair<std::string, Tensor>> entries;
    for (const RawEntry& re : raw) {
        int64_t count_elems = 1;
        for (int d : re.shape) count_elems *= d;
        if (re.offset + uint64_t(count_elems) * 4 > payload_size)
            throw std::runtime_error("checkpoint '" + path + "' entry '" + re.name +
                                     "' exceeds payload");
        std::vector<float> data(static_cast<size_t>(count_elems));
        std::memcpy(data.data(), bytes.data() + payload_start + re.offset,
                    size_t(count_elems) * 4);
        entries.emplace_back(re.name, Tensor(re.shape, std::move(data)));
    }
    return entries;
}

void load_checkpoint(const std::string& path, Network& net) {
    auto stored = read_checkpoint_entries(path);
    std::map<std::string, Tensor*> expected;
    for (Network::Layer& layer : net.layers()) {
        if (!layer.weights.empty()) {
            const char* suffix = layer.weights.ndim() == 4 ? ".filters" : ".weights";
            expected[layer.spec.name + suffix] = &layer.weights;
        }
        if (layer.spec.kind == LayerKind::BatchNorm) {
            expected[layer.spec.name + ".gamma"] = &layer.bn.gamma;
            expected[layer.spec.name + ".beta"] = &layer.bn.beta;
            expected[layer.spec.name + ".running_mean"] = &layer.bn.running_mean;
            expected[layer.spec.name + ".running_var"] = &layer.bn.running_var;
        }
    }
    if (stored.size() != expected.size())
        throw std::runtime_error("checkpoint '" + path + "' has " + std::to_string(stored.size()) +
                                 " entries, network needs " + std::to_string(expected.size()));
    std::map<std::string, Tensor> by_name;
    for (auto& [name, tensor] : stored) {
        if (!by_name.emplace(name, std::move(tensor)).second)
            throw std::runtime_error("checkpoint '" + path + "' has duplicate entry '" + name + "'");
    }
    for (auto& [name, dst] : expected) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint '" + path + "' is missing entry '" + name + "'");
        if (it->second.shape() != dst->shape())
            throw std::runtime_error("checkpoint '" + path + "' entry '" + name +
                                     "' has shape " + it->second.shape_str() + ", network expects " +
                                     dst->shape_str());
    }
    for (auto& [name, dst] : expected) *dst = std::move(by_name.at(name));
}

} // namespace adnet
