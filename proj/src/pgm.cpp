#include "msad/pgm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace msad {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * v));
}

int next_token(std::istream& in) {
  // PGM headers allow '#' comments between tokens
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  in >> value;
  return value;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw std::runtime_error("write_pgm: short write to " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error("read_pgm: not a P5 file: " + path.string());
  GrayImage img;
  img.width = static_cast<std::size_t>(next_token(in));
  img.height = static_cast<std::size_t>(next_token(in));
  const int maxval = next_token(in);
  if (maxval != 255) throw std::runtime_error("read_pgm: expected maxval 255");
  in.get();  // single whitespace after header
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw std::runtime_error("read_pgm: truncated payload in " + path.string());
  }
  return img;
}

void export_heatmap(const Tensor& map, const std::filesystem::path& path) {
  if (map.rank() != 2) throw std::invalid_argument("export_heatmap: map must be H x W");
  const double* d = map.data();
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (d[i] < 0.0 || d[i] > 1.0) {
      throw std::invalid_argument("export_heatmap: values must lie in [0,1]");
    }
  }
  GrayImage img;
  img.height = map.shape()[0];
  img.width = map.shape()[1];
  img.pixels.resize(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) img.pixels[i] = to_byte(d[i]);
  write_pgm(path, img);
}

void export_panel(const Tensor& image, const Tensor& mask, const Tensor& prediction,
                  const std::filesystem::path& path) {
  if (image.rank() != 3 || mask.rank() != 2 || prediction.rank() != 2) {
    throw std::invalid_argument("export_panel: expects [HxWx3], [HxW], [HxW]");
  }
  const std::size_t h = image.shape()[0], w = image.shape()[1];
  if (mask.shape() != Shape{h, w} || prediction.shape() != Shape{h, w}) {
    throw std::invalid_argument("export_panel: panel shapes disagree");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_panel: cannot open " + path.string());
  out << "P6\n" << 3 * w << " " << h << "\n255\n";
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.put(to_byte(image.at({y, x, c})));
    }
    for (std::size_t x = 0; x < w; ++x) {
      const char v = mask.at({y, x}) != 0.0 ? static_cast<char>(255) : 0;
      out.put(v);
      out.put(v);
      out.put(v);
    }
    for (std::size_t x = 0; x < w; ++x) {
      const std::uint8_t v = to_byte(prediction.at({y, x}));
      out.put(static_cast<char>(v));
      out.put(0);
      out.put(static_cast<char>(255 - v));
    }
  }
  if (!out) throw std::runtime_error("export_panel: short write to " + path.string());
}

}  // namespace msad
