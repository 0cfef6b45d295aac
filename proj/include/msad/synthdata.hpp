#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msad/tensor.hpp"

namespace msad {

enum class SampleClass { Normal, Abnormal };

struct Sample {
  Tensor image;  // H x W x 3 in [0,1], grayscale replicated across channels
  int label = 0;
  Tensor mask;   // H x W binary
  std::string id;
  std::string category;
};

struct DatasetSpec {
  std::uint64_t seed = 1;
  std::size_t train_normal = 100;
  std::size_t train_abnormal = 100;
  std::size_t test_normal = 24;
  std::size_t test_abnormal = 24;
  std::size_t image_size = 64;
  std::size_t lesions_min = 1;
  std::size_t lesions_max = 3;
  double contrast = 0.55;          // additive intensity shift, (0,1]
  double feather = 0.0;            // boundary falloff as a fraction of squared radius
  double min_area = 80.0;          // union lesion area bounds in pixels
  double max_area = 1200.0;
  double axis_min = 5.0;           // ellipse semi-axes in pixels
  double axis_max = 14.0;
  std::size_t texture_cells = 16;  // background noise lattice spacing
  std::string category = "lesionblob";
};

void validate_spec(const DatasetSpec& spec);

// Smooth value-noise background, fully determined by (seed, index, class).
// Values stay within [0.15, 0.75] so an additive lesion always changes them.
Tensor generate_background(const DatasetSpec& spec, std::size_t index, SampleClass cls);

Sample generate_sample(const DatasetSpec& spec, std::size_t index, SampleClass cls);

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

Dataset generate_dataset(const DatasetSpec& spec);

// harder split: reduced contrast and feathered, indistinct lesion boundaries
DatasetSpec low_contrast_variant(DatasetSpec base);

std::uint64_t dataset_digest(const Dataset& ds);
std::uint64_t samples_digest(const std::vector<Sample>& samples);

// PGM images + masks + one manifest line per sample (id, class, paths)
void export_dataset(const std::vector<Sample>& samples, const std::filesystem::path& dir);
std::vector<Sample> load_samples_from_manifest(const std::filesystem::path& manifest);

}  // namespace msad
