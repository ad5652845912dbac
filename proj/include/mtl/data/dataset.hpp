#pragma once

#include <string>
#include <vector>

#include "mtl/core/batch.hpp"
#include "mtl/data/synth.hpp"

namespace mtl::data {

// One training sample cut from a scene.
struct PatchSample {
  Tensor image;      // [bands, patch, patch]
  Tensor hse_ref;    // [patch/2, patch/2]
  LabelGrid lcz_ref; // [patch, patch]
};

// Non-overlapping by default; partial edge patches are dropped.
std::vector<PatchSample> tile_scene(const SceneBundle& bundle, int patch = 128,
                                    int stride = 0 /* 0 -> patch */);

// Number of tile origins along one axis.
int tile_count(int extent, int patch, int stride);

// Sentinel-2 L2A convention: reflectance / 10000, clipped to [0,1]. Values
// already inside [0,1] pass through unchanged.
Tensor normalize(const Tensor& image_raw);

enum class Split { Train, Val, Test };
std::string split_name(Split s);
Split split_from_name(const std::string& s);

struct ManifestEntry {
  std::string image_path;
  std::string hse_path;
  std::string lcz_path;
  Split split = Split::Train;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int format_version = 1;

  // Rejects a scene appearing in more than one split.
  void validate() const;
  std::vector<ManifestEntry> split(Split s) const;
};

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

// Loads and tiles every scene of a split.
std::vector<PatchSample> load_split_patches(const DatasetManifest& m, Split s,
                                            const std::string& base_dir, int patch);

// Assembles patch samples [lo, hi) into one batch.
SampleBatch make_batch(const std::vector<PatchSample>& samples,
                       const std::vector<int>& indices, std::size_t lo, std::size_t hi);

}  // namespace mtl::data
