#pragma once

#include <filesystem>

#include "medood/raster.hpp"

namespace medood {

void write_png_rgb(const std::filesystem::path& path, const ImageU8& img);
void write_png_gray(const std::filesystem::path& path, const LabelMap& lm);

ImageU8 read_png_rgb(const std::filesystem::path& path);
LabelMap read_png_gray(const std::filesystem::path& path);

}  // namespace medood
