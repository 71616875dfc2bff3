#include "ccoov/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace ccoov {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'C', 'O', 'O', 'V', 'C', 'K', 'P'};

class Writer {
public:
    template <typename T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + n);
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}

    template <typename T>
    T get() {
        T value;
        std::memcpy(&value, take(sizeof(T)), sizeof(T));
        return value;
    }
    const std::uint8_t* take(std::size_t n) {
        if (n > limit_ - pos_) throw CorruptCheckpoint("unexpected end of data");
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::size_t remaining() const { return limit_ - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t limit_;
    std::size_t pos_ = 0;
};

std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
    uLong c = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        c = crc32(c, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

nlohmann::json header_json(const Model& model, const TrainConfig& config) {
    nlohmann::json categories = nlohmann::json::array();
    for (const auto& c : model.schema.categories()) categories.push_back({{"name", c.name}, {"values", c.values}});
    return {{"config", config_key_values(config)},
            {"schema", {{"tags", model.schema.tags()}, {"categories", categories}, {"chars", model.schema.chars()}}},
            {"training_vocab", model.training_vocab}};
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(Model& model, const TrainConfig& config) {
    Writer w;
    w.put_bytes(kMagic, sizeof kMagic);
    w.put<std::uint32_t>(kCheckpointVersion);
    const std::string header = header_json(model, config).dump();
    w.put<std::uint64_t>(header.size());
    w.put_bytes(header.data(), header.size());

    const NamedTensors params = model.named_parameters();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        w.put_bytes(name.data(), name.size());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t->shape().size()));
        for (std::size_t d : t->shape()) w.put<std::uint64_t>(d);
        w.put_bytes(t->values().data(), t->size() * sizeof(double));
    }
    w.put<std::uint32_t>(crc(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw CorruptCheckpoint("missing checkpoint magic");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + sizeof kMagic, 4);
    if (version != kCheckpointVersion)
        throw VersionMismatch("checkpoint version " + std::to_string(version) + ", this build reads " +
                              std::to_string(kCheckpointVersion));
    if (bytes.size() < sizeof kMagic + 8) throw CorruptCheckpoint("truncated checkpoint");
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + body, 4);
    if (stored != crc(bytes.data(), body)) throw CorruptCheckpoint("checksum mismatch (truncated or modified file)");

    Reader r(bytes, body);
    r.take(sizeof kMagic + 4);
    const auto header_len = r.get<std::uint64_t>();
    if (header_len > r.remaining()) throw CorruptCheckpoint("header length exceeds file");
    const auto* hp = r.take(static_cast<std::size_t>(header_len));
    nlohmann::json header;
    TrainConfig config;
    Schema schema;
    std::vector<std::string> vocab;
    try {
        header = nlohmann::json::parse(hp, hp + header_len);
        for (const auto& [k, v] : header.at("config").items()) set_config_value(config, k, v.get<std::string>());
        std::vector<MorphCategory> categories;
        for (const auto& c : header.at("schema").at("categories"))
            categories.push_back({c.at("name").get<std::string>(), c.at("values").get<std::vector<std::string>>()});
        schema = Schema(header.at("schema").at("tags").get<std::vector<std::string>>(), std::move(categories),
                        header.at("schema").at("chars").get<std::vector<std::string>>());
        vocab = header.at("training_vocab").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpoint(std::string("bad header: ") + e.what());
    } catch (const ParseError& e) {
        throw CorruptCheckpoint(std::string("bad header: ") + e.what());
    }

    Rng unused(0);
    Checkpoint ck{config, Model::init(config.model, std::move(schema), std::move(vocab), unused)};
    const NamedTensors params = ck.model.named_parameters();
    const auto count = r.get<std::uint32_t>();
    if (count != params.size())
        throw CorruptCheckpoint("expected " + std::to_string(params.size()) + " tensors, found " + std::to_string(count));
    for (const auto& [name, t] : params) {
        const auto name_len = r.get<std::uint32_t>();
        const auto* np = r.take(name_len);
        if (std::string(reinterpret_cast<const char*>(np), name_len) != name)
            throw CorruptCheckpoint("tensor order differs at '" + name + "'");
        const auto rank = r.get<std::uint32_t>();
        ad::Shape shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
        if (shape != t->shape())
            throw CorruptCheckpoint(name + " has shape " + ad::shape_string(shape) + ", model expects " +
                                    ad::shape_string(t->shape()));
        std::memcpy(t->values().data(), r.take(t->size() * sizeof(double)), t->size() * sizeof(double));
    }
    if (r.remaining() != 0) throw CorruptCheckpoint("trailing bytes after tensors");
    return ck;
}

void save_checkpoint(Model& model, const TrainConfig& config, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(model, config);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace ccoov
