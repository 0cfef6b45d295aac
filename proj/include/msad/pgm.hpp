#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "msad/tensor.hpp"

namespace msad {

struct GrayImage {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);

// value = round(255 * G); G must lie in [0,1]
void export_heatmap(const Tensor& map, const std::filesystem::path& path);

// image | mask | prediction side by side as a P6 color panel
void export_panel(const Tensor& image, const Tensor& mask, const Tensor& prediction,
                  const std::filesystem::path& path);

}  // namespace msad
