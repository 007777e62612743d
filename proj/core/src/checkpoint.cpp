#include "wrecon/checkpoint.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "wrecon/errors.hpp"

namespace wrecon {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'W', 'R', 'E', 'C', 'K', 'P', 'T', '1'};

// JSON has no NaN; losses of empty splits are stored as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); }

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json directory_entry(const std::string& group, const std::string& name, const Shape& shape, std::uint64_t offset) {
    return {{"group", group}, {"name", name}, {"shape", shape}, {"offset", offset}};
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    json tensors = json::array();
    std::uint64_t offset = 0;
    const auto add = [&](const std::string& group, const std::string& name, const Tensor<float>& t) {
        tensors.push_back(directory_entry(group, name, t.shape, offset));
        offset += 4 * t.size();
    };
    for (std::size_t i = 0; i < ckpt.params.size(); ++i)
        add("param", ckpt.params.name(static_cast<int>(i)), ckpt.params.value(static_cast<int>(i)));
    for (std::size_t i = 0; i < ckpt.adam_m.size(); ++i)
        add("adam_m", ckpt.params.name(static_cast<int>(i)), ckpt.adam_m[i]);
    for (std::size_t i = 0; i < ckpt.adam_v.size(); ++i)
        add("adam_v", ckpt.params.name(static_cast<int>(i)), ckpt.adam_v[i]);

    json history = json::array();
    for (const auto& h : ckpt.history)
        history.push_back({{"epoch", h.epoch},
                           {"train_loss", finite_or_null(h.train_loss)},
                           {"val_loss", finite_or_null(h.val_loss)},
                           {"seconds", h.seconds}});
    json header = {
        {"schema_version", ckpt.schema_version},
        {"config", ckpt.config},
        {"epoch", ckpt.epoch},
        {"optimizer", {{"kind", "adam"}, {"step", ckpt.optimizer_step}}},
        {"rng_state", ckpt.rng_state},
        {"history", history},
        {"best_val", std::isfinite(ckpt.best_val) ? json(ckpt.best_val) : json(nullptr)},
        {"payload_bytes", offset},
        {"tensors", tensors},
    };
    const std::string text = header.dump();

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        out.write(kMagic.data(), kMagic.size());
        const std::uint64_t len = text.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof len);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        const auto blob = [&](const Tensor<float>& t) {
            out.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(4 * t.size()));
        };
        for (std::size_t i = 0; i < ckpt.params.size(); ++i) blob(ckpt.params.value(static_cast<int>(i)));
        for (const auto& t : ckpt.adam_m) blob(t);
        for (const auto& t : ckpt.adam_v) blob(t);
        if (!out) throw IoError("write failed for checkpoint " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw DataError(path.string() + " is not a checkpoint (bad magic)");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len == 0 || len > (1ull << 30)) throw DataError("checkpoint header length is corrupt");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("checkpoint truncated inside header");

    Checkpoint ck;
    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    try {
        const int version = header.at("schema_version").get<int>();
        if (version != Checkpoint::kSchemaVersion)
            throw DataError("checkpoint schema version " + std::to_string(version) + " does not match supported version " +
                            std::to_string(Checkpoint::kSchemaVersion));
        ck.schema_version = version;
        ck.config = header.at("config");
        ck.epoch = header.at("epoch").get<int>();
        ck.optimizer_step = header.at("optimizer").at("step").get<std::int64_t>();
        ck.rng_state = header.at("rng_state").get<std::string>();
        for (const auto& h : header.at("history"))
            ck.history.push_back({h.at("epoch").get<int>(), number_or_nan(h.at("train_loss")),
                                  number_or_nan(h.at("val_loss")), h.at("seconds").get<double>()});
        const auto& best = header.at("best_val");
        ck.best_val = best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>();

        const std::uint64_t payload = header.at("payload_bytes").get<std::uint64_t>();
        std::vector<char> bytes(payload);
        in.read(bytes.data(), static_cast<std::streamsize>(payload));
        if (!in || static_cast<std::uint64_t>(in.gcount()) != payload)
            throw DataError("checkpoint truncated: payload shorter than " + std::to_string(payload) + " bytes");

        for (const auto& e : header.at("tensors")) {
            const auto shape = e.at("shape").get<Shape>();
            const auto offset = e.at("offset").get<std::uint64_t>();
            Tensor<float> t(shape);
            if (offset + 4 * t.size() > payload) throw DataError("checkpoint tensor extends past payload");
            std::memcpy(t.ptr(), bytes.data() + offset, 4 * t.size());
            const auto group = e.at("group").get<std::string>();
            const auto name = e.at("name").get<std::string>();
            if (group == "param")
                ck.params.add(name, std::move(t));
            else if (group == "adam_m")
                ck.adam_m.push_back(std::move(t));
            else if (group == "adam_v")
                ck.adam_v.push_back(std::move(t));
            else
                throw DataError("unknown tensor group '" + group + "' in checkpoint");
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
    if (!ck.adam_m.empty() && (ck.adam_m.size() != ck.params.size() || ck.adam_v.size() != ck.params.size()))
        throw DataError("checkpoint optimizer state does not match its parameters");
    return ck;
}

}  // namespace wrecon
