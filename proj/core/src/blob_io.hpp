#pragma once

// Shared on-disk container for datasets and checkpoints: 16-byte header
// (8 magic bytes, u32 version, 4 reserved zero bytes), a u64-length-prefixed
// UTF-8 JSON metadata blob, then a little-endian f64 payload.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "on-disk format assumes a little-endian host");

namespace conslearn::detail {

void write_blob(const std::filesystem::path& path, std::string_view magic8,
                std::uint32_t version, const nlohmann::json& meta,
                std::span<const double> payload);

struct Blob {
    std::uint32_t version = 0;
    nlohmann::json meta;
    std::vector<double> payload;
};

Blob read_blob(const std::filesystem::path& path, std::string_view magic8);

} // namespace conslearn::detail
