#include "mtl/data/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mtl/core/errors.hpp"
#include "mtl/core/io.hpp"

namespace mtl::data {

namespace fs = std::filesystem;
using nlohmann::json;

int tile_count(int extent, int patch, int stride) {
  if (extent < patch) return 0;
  return (extent - patch) / stride + 1;
}

std::vector<PatchSample> tile_scene(const SceneBundle& bundle, int patch, int stride) {
  if (stride == 0) stride = patch;
  if (patch < 2 || patch % 4 != 0) throw ConfigError("patch must be a positive multiple of 4");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (stride % 2 != 0) throw ConfigError("stride must be even (20 m grid alignment)");
  const int bands = bundle.image.dim(0);
  const int H = bundle.image.dim(1), W = bundle.image.dim(2);
  if (patch > H || patch > W) throw ConfigError("patch larger than scene");
  std::vector<PatchSample> out;
  const int ny = tile_count(H, patch, stride);
  const int nx = tile_count(W, patch, stride);
  for (int ty = 0; ty < ny; ++ty)
    for (int tx = 0; tx < nx; ++tx) {
      const int y0 = ty * stride, x0 = tx * stride;
      PatchSample s;
      s.image = Tensor({bands, patch, patch});
      for (int b = 0; b < bands; ++b)
        for (int i = 0; i < patch; ++i)
          for (int j = 0; j < patch; ++j)
            s.image[(static_cast<std::size_t>(b) * patch + i) * patch + j] =
                bundle.image[(static_cast<std::size_t>(b) * H + y0 + i) * W + x0 + j];
      const int hp = patch / 2, hH = H / 2, hW = W / 2;
      s.hse_ref = Tensor({hp, hp});
      for (int i = 0; i < hp; ++i)
        for (int j = 0; j < hp; ++j)
          s.hse_ref[static_cast<std::size_t>(i) * hp + j] =
              bundle.hse_ref[static_cast<std::size_t>(y0 / 2 + i) * hW + x0 / 2 + j];
      (void)hH;
      s.lcz_ref = LabelGrid({patch, patch});
      for (int i = 0; i < patch; ++i)
        for (int j = 0; j < patch; ++j)
          s.lcz_ref[static_cast<std::size_t>(i) * patch + j] =
              bundle.lcz_ref[static_cast<std::size_t>(y0 + i) * W + x0 + j];
      out.push_back(std::move(s));
    }
  return out;
}

Tensor normalize(const Tensor& image_raw) {
  Tensor out(image_raw.dims());
  for (std::size_t i = 0; i < image_raw.numel(); ++i) {
    double v = image_raw[i];
    if (v < 0.0) throw RangeError("normalize: negative reflectance");
    if (v > 1.0) v /= 10000.0;  // raw Sentinel-2 L2A digital numbers
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split: " + s, 0);
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  std::set<std::string> dup_check;
  for (const auto& e : entries) {
    if (e.image_path.empty() || e.hse_path.empty() || e.lcz_path.empty())
      throw ValidationError("manifest entry with empty path");
    if (!seen.insert(e.image_path).second)
      throw ValidationError("scene appears in more than one split: " + e.image_path);
  }
}

std::vector<ManifestEntry> DatasetManifest::split(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
  m.validate();
  json j;
  j["format"] = "mtl-dataset";
  j["version"] = m.format_version;
  json arr = json::array();
  for (const auto& e : m.entries)
    arr.push_back(json{{"image", e.image_path},
                       {"hse", e.hse_path},
                       {"lcz", e.lcz_path},
                       {"split", split_name(e.split)}});
  j["scenes"] = arr;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad JSON: " + e.what(), 0);
  }
  DatasetManifest m;
  try {
    m.format_version = j.at("version").get<int>();
    for (const auto& e : j.at("scenes")) {
      ManifestEntry me;
      me.image_path = e.at("image").get<std::string>();
      me.hse_path = e.at("hse").get<std::string>();
      me.lcz_path = e.at("lcz").get<std::string>();
      me.split = split_from_name(e.at("split").get<std::string>());
      m.entries.push_back(std::move(me));
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad manifest structure: " + e.what(), 0);
  }
  m.validate();
  return m;
}

std::vector<PatchSample> load_split_patches(const DatasetManifest& m, Split s,
                                            const std::string& base_dir, int patch) {
  std::vector<PatchSample> out;
  for (const auto& e : m.split(s)) {
    SceneBundle b;
    b.image = normalize(read_tensor((fs::path(base_dir) / e.image_path).string()));
    b.hse_ref = read_tensor((fs::path(base_dir) / e.hse_path).string());
    b.lcz_ref = read_labels((fs::path(base_dir) / e.lcz_path).string());
    auto patches = tile_scene(b, patch, patch);
    for (auto& p : patches) out.push_back(std::move(p));
  }
  return out;
}

SampleBatch make_batch(const std::vector<PatchSample>& samples,
                       const std::vector<int>& indices, std::size_t lo, std::size_t hi) {
  if (hi <= lo || hi > indices.size()) throw ConfigError("make_batch: bad range");
  const int n = static_cast<int>(hi - lo);
  const PatchSample& first = samples[static_cast<std::size_t>(indices[lo])];
  const int bands = first.image.dim(0);
  const int ph = first.image.dim(1), pw = first.image.dim(2);
  SampleBatch b;
  b.images = Tensor({n, bands, ph, pw});
  b.hse_ref = Tensor({n, ph / 2, pw / 2});
  b.lcz_ref = LabelGrid({n, ph, pw});
  for (int s = 0; s < n; ++s) {
    const PatchSample& ps = samples[static_cast<std::size_t>(indices[lo + s])];
    std::copy_n(ps.image.data(), ps.image.numel(),
                b.images.data() + static_cast<std::size_t>(s) * ps.image.numel());
    std::copy_n(ps.hse_ref.data(), ps.hse_ref.numel(),
                b.hse_ref.data() + static_cast<std::size_t>(s) * ps.hse_ref.numel());
    std::copy_n(ps.lcz_ref.data(), ps.lcz_ref.numel(),
                b.lcz_ref.data() + static_cast<std::size_t>(s) * ps.lcz_ref.numel());
  }
  return b;
}

}  // namespace mtl::data
