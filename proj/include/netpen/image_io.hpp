#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "netpen/image.hpp"

namespace netpen {

void write_png(const std::filesystem::path& path, const RgbImage& img, int compression = 3);
RgbImage read_png(const std::filesystem::path& path);

void write_png16(const std::filesystem::path& path, int width, int height,
                 const std::vector<std::uint16_t>& gray);
std::vector<std::uint16_t> read_png16(const std::filesystem::path& path, int& width, int& height);

}  // namespace netpen
