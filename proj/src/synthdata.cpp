#include "msad/synthdata.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "msad/pgm.hpp"
#include "msad/rng.hpp"

namespace msad {

namespace {

double lattice_value(std::uint64_t key, std::int64_t gx, std::int64_t gy) {
  const std::uint64_t h = hash_key(key, "lat", static_cast<std::uint64_t>(gx),
                                   static_cast<std::uint64_t>(gy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// bilinear value noise on an integer lattice; add/mul/div only, no libm
double value_noise(std::uint64_t key, std::size_t x, std::size_t y, std::size_t cell) {
  const std::int64_t gx = static_cast<std::int64_t>(x / cell);
  const std::int64_t gy = static_cast<std::int64_t>(y / cell);
  const double tx = static_cast<double>(x % cell) / static_cast<double>(cell);
  const double ty = static_cast<double>(y % cell) / static_cast<double>(cell);
  const double v00 = lattice_value(key, gx, gy);
  const double v01 = lattice_value(key, gx + 1, gy);
  const double v10 = lattice_value(key, gx, gy + 1);
  const double v11 = lattice_value(key, gx + 1, gy + 1);
  return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) + ty * ((1.0 - tx) * v10 + tx * v11);
}

std::uint64_t sample_key(const DatasetSpec& spec, std::size_t index, SampleClass cls,
                         std::string_view stream) {
  return hash_key(spec.seed, stream, index, cls == SampleClass::Abnormal ? 1 : 0);
}

struct Ellipse {
  double cx, cy, a, b;

  // squared normalized radius; <= 1 is inside
  double q(double x, double y) const {
    const double dx = (x - cx) / a;
    const double dy = (y - cy) / b;
    return dx * dx + dy * dy;
  }
};

std::vector<Ellipse> draw_lesions(const DatasetSpec& spec, Rng& rng) {
  const double s = static_cast<double>(spec.image_size);
  if (2.0 * spec.axis_min + 2.0 >= s) {
    throw std::invalid_argument("generate_sample: lesion cannot fit at requested size");
  }
  const std::size_t count =
      static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(spec.lesions_min),
                                               static_cast<std::int64_t>(spec.lesions_max)));
  std::vector<Ellipse> lesions;
  lesions.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double axis_cap = std::min(spec.axis_max, (s - 2.0) / 2.0);
    const double a = rng.uniform(spec.axis_min, axis_cap);
    const double b = rng.uniform(spec.axis_min, axis_cap);
    const double cx = rng.uniform(a, s - 1.0 - a);
    const double cy = rng.uniform(b, s - 1.0 - b);
    lesions.push_back({cx, cy, a, b});
  }
  return lesions;
}

double union_area(const std::vector<Ellipse>& lesions, std::size_t size) {
  double area = 0.0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      for (const Ellipse& e : lesions) {
        if (e.q(static_cast<double>(x), static_cast<double>(y)) <= 1.0) {
          area += 1.0;
          break;
        }
      }
    }
  }
  return area;
}

std::string class_name(SampleClass cls) {
  return cls == SampleClass::Abnormal ? "abnormal" : "normal";
}

}  // namespace

void validate_spec(const DatasetSpec& spec) {
  if (spec.train_normal == 0 || spec.train_abnormal == 0 || spec.test_normal == 0 ||
      spec.test_abnormal == 0) {
    throw std::invalid_argument("DatasetSpec: split counts must be positive");
  }
  if (!(spec.contrast > 0.0 && spec.contrast <= 1.0)) {
    throw std::invalid_argument("DatasetSpec: contrast must lie in (0,1]");
  }
  if (spec.feather < 0.0 || spec.feather >= 1.0) {
    throw std::invalid_argument("DatasetSpec: feather must lie in [0,1)");
  }
  if (spec.lesions_min == 0 || spec.lesions_min > spec.lesions_max) {
    throw std::invalid_argument("DatasetSpec: invalid lesion count range");
  }
  if (!(spec.axis_min > 0.0 && spec.axis_min <= spec.axis_max)) {
    throw std::invalid_argument("DatasetSpec: invalid axis range");
  }
  if (!(spec.min_area > 0.0 && spec.min_area < spec.max_area)) {
    throw std::invalid_argument("DatasetSpec: invalid area bounds");
  }
  if (spec.image_size < 8 || spec.texture_cells < 2) {
    throw std::invalid_argument("DatasetSpec: image or texture scale too small");
  }
}

Tensor generate_background(const DatasetSpec& spec, std::size_t index, SampleClass cls) {
  const std::size_t s = spec.image_size;
  const std::uint64_t key = sample_key(spec, index, cls, "background");
  const std::size_t coarse = spec.texture_cells;
  const std::size_t fine = std::max<std::size_t>(2, spec.texture_cells / 4);
  Tensor bg(Shape{s, s});
  double* d = bg.data();
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      const double n = 0.8 * value_noise(key, x, y, coarse) +
                       0.2 * value_noise(key ^ 0x5bd1e995, x, y, fine);
      d[y * s + x] = 0.15 + 0.6 * n;
    }
  }
  return bg;
}

Sample generate_sample(const DatasetSpec& spec, std::size_t index, SampleClass cls) {
  validate_spec(spec);
  const std::size_t s = spec.image_size;
  Tensor bg = generate_background(spec, index, cls);
  Tensor mask(Shape{s, s}, 0.0);
  Tensor image(Shape{s, s, 3});

  std::vector<Ellipse> lesions;
  if (cls == SampleClass::Abnormal) {
    Rng rng(sample_key(spec, index, cls, "lesions"));
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      lesions = draw_lesions(spec, rng);
      const double area = union_area(lesions, s);
      placed = area >= spec.min_area && area <= spec.max_area;
    }
    if (!placed) {
      throw std::runtime_error(
          "generate_sample: could not place lesions within the area bounds");
    }
  }

  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      double value = bg.at({y, x});
      double alpha = 0.0;
      for (const Ellipse& e : lesions) {
        const double q = e.q(static_cast<double>(x), static_cast<double>(y));
        if (q > 1.0) continue;
        mask.at({y, x}) = 1.0;
        double a = 1.0;
        if (spec.feather > 0.0) {
          a = (1.0 - q) / spec.feather;
          if (a > 1.0) a = 1.0;
        }
        alpha = std::max(alpha, a);
      }
      value = std::min(1.0, value + alpha * spec.contrast);
      image.at({y, x, 0}) = value;
      image.at({y, x, 1}) = value;
      image.at({y, x, 2}) = value;
    }
  }

  Sample out;
  out.image = image;
  out.mask = mask;
  out.label = cls == SampleClass::Abnormal ? 1 : 0;
  out.category = spec.category;
  std::ostringstream id;
  id << class_name(cls)[0] << "-" << index;
  out.id = id.str();
  return out;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  validate_spec(spec);
  Dataset ds;
  std::size_t next_index = 0;
  auto emit = [&](std::vector<Sample>& dst, std::size_t count, SampleClass cls,
                  const char* split) {
    for (std::size_t i = 0; i < count; ++i) {
      Sample s = generate_sample(spec, next_index, cls);
      s.id = std::string(split) + "-" + s.id;
      dst.push_back(std::move(s));
      ++next_index;
    }
  };
  emit(ds.train, spec.train_normal, SampleClass::Normal, "tr");
  emit(ds.train, spec.train_abnormal, SampleClass::Abnormal, "tr");
  emit(ds.test, spec.test_normal, SampleClass::Normal, "te");
  emit(ds.test, spec.test_abnormal, SampleClass::Abnormal, "te");
  return ds;
}

DatasetSpec low_contrast_variant(DatasetSpec base) {
  base.contrast = base.contrast * 0.35;
  base.feather = 0.6;
  validate_spec(base);
  return base;
}

std::uint64_t samples_digest(const std::vector<Sample>& samples) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV offset basis
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const unsigned char* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Sample& s : samples) {
    mix_bytes(s.id.data(), s.id.size());
    mix_bytes(&s.label, sizeof(s.label));
    mix_bytes(s.image.data(), s.image.size() * sizeof(double));
    mix_bytes(s.mask.data(), s.mask.size() * sizeof(double));
  }
  return h;
}

std::uint64_t dataset_digest(const Dataset& ds) {
  return mix64(samples_digest(ds.train) ^ mix64(samples_digest(ds.test)));
}

void export_dataset(const std::vector<Sample>& samples, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw std::runtime_error("export_dataset: cannot write manifest");
  for (const Sample& s : samples) {
    const std::size_t h = s.image.shape()[0], w = s.image.shape()[1];
    GrayImage img;
    img.height = h;
    img.width = w;
    img.pixels.resize(h * w);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        img.pixels[y * w + x] =
            static_cast<std::uint8_t>(std::lround(255.0 * s.image.at({y, x, 0})));
      }
    }
    const std::string image_rel = "images/" + s.id + ".pgm";
    const std::string mask_rel = "masks/" + s.id + ".pgm";
    write_pgm(dir / image_rel, img);

    GrayImage m;
    m.height = h;
    m.width = w;
    m.pixels.resize(h * w);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        m.pixels[y * w + x] = s.mask.at({y, x}) != 0.0 ? 255 : 0;
      }
    }
    write_pgm(dir / mask_rel, m);
    manifest << s.id << '\t' << (s.label ? "abnormal" : "normal") << '\t' << image_rel << '\t'
             << mask_rel << '\n';
  }
}

std::vector<Sample> load_samples_from_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("load_samples: cannot open " + manifest.string());
  const std::filesystem::path root = manifest.parent_path();
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, cls, image_rel, mask_rel;
    if (!(row >> id >> cls >> image_rel >> mask_rel)) {
      throw std::runtime_error("load_samples: malformed manifest line " +
                               std::to_string(line_no));
    }
    if (cls != "normal" && cls != "abnormal") {
      throw std::runtime_error("load_samples: unknown class '" + cls + "' at line " +
                               std::to_string(line_no));
    }
    GrayImage img = read_pgm(root / image_rel);
    GrayImage msk = read_pgm(root / mask_rel);
    if (img.width != msk.width || img.height != msk.height) {
      throw std::runtime_error("load_samples: image/mask size mismatch for " + id);
    }
    Sample s;
    s.id = id;
    s.label = cls == "abnormal" ? 1 : 0;
    s.category = "lesionblob";
    s.image = Tensor(Shape{img.height, img.width, 3});
    s.mask = Tensor(Shape{img.height, img.width});
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        const double v = static_cast<double>(img.pixels[y * img.width + x]) / 255.0;
        s.image.at({y, x, 0}) = v;
        s.image.at({y, x, 1}) = v;
        s.image.at({y, x, 2}) = v;
        s.mask.at({y, x}) = msk.pixels[y * img.width + x] >= 128 ? 1.0 : 0.0;
      }
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace msad
