#include "mtl/infer/infer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "mtl/core/io.hpp"
#include "mtl/core/lcz.hpp"

namespace mtl::infer {

namespace fs = std::filesystem;

std::vector<int> window_origins(int extent, int window, int stride) {
  std::vector<int> origins;
  for (int o = 0; o + window <= extent; o += stride) origins.push_back(o);
  int last = extent - window;
  if (origins.empty() || origins.back() != last) origins.push_back(last);
  return origins;
}

ScenePrediction sliding_window_predict(MtlModel& model, const Tensor& scene_image,
                                       int window, int overlap) {
  if (scene_image.ndim() != 3) throw ShapeError("scene image must be [bands, H, W]");
  const int bands = scene_image.dim(0);
  const int H = scene_image.dim(1), W = scene_image.dim(2);
  if (H < window || W < window)
    throw SceneTooSmallError("scene smaller than inference window");
  if (overlap < 0 || overlap >= window) throw ConfigError("overlap must lie in [0, window)");
  if (window % 4 != 0) throw ConfigError("window must be a multiple of 4");
  const int stride = window - overlap;
  if (stride % 2 != 0) throw ConfigError("window - overlap must be even (20 m grid alignment)");

  const ModelConfig& cfg = model.config();
  const bool want_hse = cfg.task != TaskMode::LczOnly;
  const bool want_lcz = cfg.task != TaskMode::HseOnly;
  const int K = cfg.num_classes;

  Tensor hse_sum, hse_cnt, lcz_sum, lcz_cnt;
  if (want_hse) {
    hse_sum = Tensor({H / 2, W / 2});
    hse_cnt = Tensor({H / 2, W / 2});
  }
  if (want_lcz) {
    lcz_sum = Tensor({K, H, W});
    lcz_cnt = Tensor({H, W});
  }

  const auto ys = window_origins(H, window, stride);
  const auto xs = window_origins(W, window, stride);
  Tensor patch({1, bands, window, window});
  for (int y0 : ys)
    for (int x0 : xs) {
      for (int b = 0; b < bands; ++b)
        for (int i = 0; i < window; ++i)
          for (int j = 0; j < window; ++j)
            patch.at4(0, b, i, j) =
                scene_image[(static_cast<std::size_t>(b) * H + y0 + i) * W + x0 + j];
      ModelOutput out = model.forward(patch, nullptr, /*train_mode=*/false,
                                      PriorSource::Prediction);
      if (want_hse) {
        const Tensor& h = out.hse.value();  // [1,1,window/2,window/2]
        const int hw = window / 2;
        for (int i = 0; i < hw; ++i)
          for (int j = 0; j < hw; ++j) {
            std::size_t idx = static_cast<std::size_t>(y0 / 2 + i) * (W / 2) + x0 / 2 + j;
            hse_sum[idx] += h[static_cast<std::size_t>(i) * hw + j];
            hse_cnt[idx] += 1.0;
          }
      }
      if (want_lcz) {
        const Tensor& p = out.lcz_avg.value();  // [1,K,window,window]
        for (int c = 0; c < K; ++c)
          for (int i = 0; i < window; ++i)
            for (int j = 0; j < window; ++j)
              lcz_sum[(static_cast<std::size_t>(c) * H + y0 + i) * W + x0 + j] +=
                  p.at4(0, c, i, j);
        for (int i = 0; i < window; ++i)
          for (int j = 0; j < window; ++j)
            lcz_cnt[static_cast<std::size_t>(y0 + i) * W + x0 + j] += 1.0;
      }
    }

  ScenePrediction pred;
  if (want_hse) {
    pred.hse = Tensor({H / 2, W / 2});
    for (std::size_t i = 0; i < pred.hse.numel(); ++i)
      pred.hse[i] = hse_sum[i] / hse_cnt[i];
  }
  if (want_lcz) {
    pred.lcz_probs = Tensor({K, H, W});
    for (int c = 0; c < K; ++c)
      for (std::size_t i = 0; i < static_cast<std::size_t>(H) * W; ++i)
        pred.lcz_probs[static_cast<std::size_t>(c) * H * W + i] =
            lcz_sum[static_cast<std::size_t>(c) * H * W + i] / lcz_cnt[i];
  }
  return pred;
}

LabelGrid aggregate_lcz(const Tensor& prob_map, int block) {
  if (prob_map.ndim() != 3) throw ShapeError("prob map must be [K, H, W]");
  if (block < 1) throw ConfigError("block must be >= 1");
  const int K = prob_map.dim(0), H = prob_map.dim(1), W = prob_map.dim(2);
  if (H < block || W < block) throw ShapeError("prob map smaller than one block");
  const int nb_y = H / block, nb_x = W / block;
  LabelGrid out({nb_y, nb_x});
  std::vector<double> mean(static_cast<std::size_t>(K));
  for (int by = 0; by < nb_y; ++by)
    for (int bx = 0; bx < nb_x; ++bx) {
      std::fill(mean.begin(), mean.end(), 0.0);
      for (int c = 0; c < K; ++c)
        for (int i = 0; i < block; ++i)
          for (int j = 0; j < block; ++j)
            mean[c] += prob_map[(static_cast<std::size_t>(c) * H + by * block + i) * W +
                                bx * block + j];
      int best = 0;
      for (int c = 1; c < K; ++c)
        if (mean[c] > mean[best]) best = c;  // strict > keeps the lowest index on ties
      out[static_cast<std::size_t>(by) * nb_x + bx] = static_cast<std::uint8_t>(best);
    }
  return out;
}

void write_png_gray(const std::string& path, const Tensor& img01) {
  if (img01.ndim() != 2) throw ShapeError("grayscale image must be [H, W]");
  const int H = img01.dim(0), W = img01.dim(1);
  std::vector<std::uint8_t> raster(static_cast<std::size_t>(H) * W);
  for (std::size_t i = 0; i < raster.size(); ++i) {
    double v = std::clamp(img01[i], 0.0, 1.0);
    raster[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  detail::write_png(path, H, W, 1, raster);
}

void write_png_rgb(const std::string& path, int height, int width,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3)
    throw ShapeError("rgb buffer size does not match dims");
  detail::write_png(path, height, width, 3, rgb);
}

void render_maps(const Tensor& hse, const LabelGrid& lcz, const std::string& out_dir) {
  fs::create_directories(out_dir);
  if (!hse.empty()) {
    write_png_gray((fs::path(out_dir) / "hse.png").string(), hse);
    write_tensor((fs::path(out_dir) / "hse.mtlt").string(), hse);
  }
  if (!lcz.empty()) {
    const int H = lcz.dim(0), W = lcz.dim(1);
    const auto& classes = lcz_classes();
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(H) * W * 3, 0);
    for (std::size_t i = 0; i < lcz.numel(); ++i) {
      std::uint8_t c = lcz[i];
      if (c < kNumLczClasses) {
        rgb[i * 3 + 0] = classes[c].color[0];
        rgb[i * 3 + 1] = classes[c].color[1];
        rgb[i * 3 + 2] = classes[c].color[2];
      }  // IGNORE renders black
    }
    write_png_rgb((fs::path(out_dir) / "lcz.png").string(), H, W, rgb);
    write_labels((fs::path(out_dir) / "lcz.mtlt").string(), lcz);
  }
}

}  // namespace mtl::infer
