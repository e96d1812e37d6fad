#include "blob_io.hpp"

#include <cstring>
#include <fstream>

#include "conslearn/error.hpp"

namespace conslearn::detail {

void write_blob(const std::filesystem::path& path, std::string_view magic8,
                std::uint32_t version, const nlohmann::json& meta,
                std::span<const double> payload) {
    if (magic8.size() != 8) throw IoError("write_blob: magic must be 8 bytes");
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");

    char header[16] = {};
    std::memcpy(header, magic8.data(), 8);
    std::memcpy(header + 8, &version, 4);
    f.write(header, sizeof(header));

    std::string json_text = meta.dump();
    std::uint64_t json_len = json_text.size();
    f.write(reinterpret_cast<const char*>(&json_len), 8);
    f.write(json_text.data(), static_cast<std::streamsize>(json_text.size()));
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!f) throw IoError("write failed for '" + path.string() + "'");
}

Blob read_blob(const std::filesystem::path& path, std::string_view magic8) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "'");

    char header[16] = {};
    f.read(header, sizeof(header));
    if (f.gcount() != sizeof(header)) {
        throw IoError("'" + path.string() + "': truncated header");
    }
    if (std::memcmp(header, magic8.data(), 8) != 0) {
        throw IoError("'" + path.string() + "': bad magic bytes");
    }

    Blob blob;
    std::memcpy(&blob.version, header + 8, 4);
    if (blob.version != 1) {
        throw IoError("'" + path.string() + "': unsupported format version " +
                      std::to_string(blob.version));
    }

    std::uint64_t json_len = 0;
    f.read(reinterpret_cast<char*>(&json_len), 8);
    if (f.gcount() != 8) throw IoError("'" + path.string() + "': truncated length field");

    auto remaining = [&]() -> std::uint64_t {
        auto pos = f.tellg();
        f.seekg(0, std::ios::end);
        auto end = f.tellg();
        f.seekg(pos);
        return static_cast<std::uint64_t>(end - pos);
    };
    std::uint64_t rest = remaining();
    if (json_len > rest) throw IoError("'" + path.string() + "': truncated metadata");

    std::string json_text(json_len, '\0');
    f.read(json_text.data(), static_cast<std::streamsize>(json_len));
    try {
        blob.meta = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "': bad metadata JSON: " + e.what());
    }

    std::uint64_t payload_bytes = rest - json_len;
    if (payload_bytes % sizeof(double) != 0) {
        throw IoError("'" + path.string() + "': payload is not a whole number of f64");
    }
    blob.payload.resize(payload_bytes / sizeof(double));
    f.read(reinterpret_cast<char*>(blob.payload.data()),
           static_cast<std::streamsize>(payload_bytes));
    if (f.gcount() != static_cast<std::streamsize>(payload_bytes)) {
        throw IoError("'" + path.string() + "': truncated payload");
    }
    return blob;
}

} // namespace conslearn::detail
