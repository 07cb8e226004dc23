#pragma once

// Training-time image augmentation: random crop and small random rotation
// with bilinear resampling. Off by default; at 32x32 the lesions are a few
// pixels wide and cropping/rotating destroys the signal, so this only makes
// sense for large-resolution runs.

#include <cmath>
#include <vector>

#include "ddatr/rng.hpp"

namespace ddatr {

// Rotates about the image center, bilinear, zero border.
inline std::vector<float> rotate_image(const std::vector<float>& img, std::size_t size,
                                       double degrees) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double mid = (double(size) - 1.0) / 2.0;
  std::vector<float> out(size * size, 0.0f);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = double(x) - mid, dy = double(y) - mid;
      const double sx = c * dx + s * dy + mid;
      const double sy = -s * dx + c * dy + mid;
      const long x0 = long(std::floor(sx)), y0 = long(std::floor(sy));
      const double fx = sx - double(x0), fy = sy - double(y0);
      double acc = 0.0;
      for (int oy = 0; oy < 2; ++oy) {
        for (int ox = 0; ox < 2; ++ox) {
          const long xi = x0 + ox, yi = y0 + oy;
          if (xi < 0 || yi < 0 || xi >= long(size) || yi >= long(size)) continue;
          const double wgt = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
          acc += wgt * double(img[std::size_t(yi) * size + std::size_t(xi)]);
        }
      }
      out[y * size + x] = float(acc);
    }
  }
  return out;
}

inline std::vector<float> crop_image(const std::vector<float>& img, std::size_t size,
                                     std::size_t crop, std::size_t off_x, std::size_t off_y) {
  std::vector<float> out(crop * crop);
  for (std::size_t y = 0; y < crop; ++y) {
    for (std::size_t x = 0; x < crop; ++x) {
      out[y * crop + x] = img[(y + off_y) * size + (x + off_x)];
    }
  }
  return out;
}

// Random rotation within +-max_rotation_deg followed by a random crop to
// crop_size (identity when crop_size >= size).
inline std::vector<float> augment_image(const std::vector<float>& img, std::size_t size,
                                        std::size_t crop_size, double max_rotation_deg, Rng& rng) {
  std::vector<float> rotated = rotate_image(img, size, rng.uniform(-max_rotation_deg,
                                                                   max_rotation_deg));
  if (crop_size >= size) return rotated;
  const std::size_t span = size - crop_size;
  const std::size_t ox = rng.below(span + 1), oy = rng.below(span + 1);
  return crop_image(rotated, size, crop_size, ox, oy);
}

}  // namespace ddatr
