/**
 * Copyright 2026 The edgepart Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "edgepart/kernels.hpp"

namespace edgepart::kernels {

namespace {

inline float dot_row(const float* w, const float* x, int64_t in) {
  float acc = 0.0f;
  for (int64_t j = 0; j < in; ++j) acc += w[j] * x[j];
  return acc;
}

inline float conv_point(const ConvGeometry& g, const float* w, const float* x, int64_t oy, int64_t ox, int64_t f) {
  const float* wf = w + f * g.kernel_h * g.kernel_w * g.in_c;
  float acc = 0.0f;
  for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
    const int64_t iy = oy * g.stride + ky - g.pad_top;
    if (iy < 0 || iy >= g.in_h) continue;
    for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
      const int64_t ix = ox * g.stride + kx - g.pad_left;
      if (ix < 0 || ix >= g.in_w) continue;
      const float* xp = x + (iy * g.in_w + ix) * g.in_c;
      const float* wp = wf + (ky * g.kernel_w + kx) * g.in_c;
      for (int64_t c = 0; c < g.in_c; ++c) acc += wp[c] * xp[c];
    }
  }
  return acc;
}

}  // namespace

void fc_serial(const float* w, const float* b, const float* x, int64_t in, int64_t rows, float* y) {
  for (int64_t r = 0; r < rows; ++r) y[r] = dot_row(w + r * in, x, in) + b[r];
}

void fc_parallel(const float* w, const float* b, const float* x, int64_t in, int64_t rows, float* y) {
#pragma omp parallel for schedule(static) if (rows * in > 65536)
  for (int64_t r = 0; r < rows; ++r) y[r] = dot_row(w + r * in, x, in) + b[r];
}

void conv_serial(const ConvGeometry& g, const float* w, const float* b, const float* x, float* y) {
  for (int64_t oy = 0; oy < g.out_h; ++oy) {
    for (int64_t ox = 0; ox < g.out_w; ++ox) {
      float* out = y + (oy * g.out_w + ox) * g.filters;
      for (int64_t f = 0; f < g.filters; ++f) out[f] = conv_point(g, w, x, oy, ox, f) + b[f];
    }
  }
}

void conv_parallel(const ConvGeometry& g, const float* w, const float* b, const float* x, float* y) {
  const int64_t points = g.out_h * g.out_w;
#pragma omp parallel for schedule(static) if (points * g.filters > 4096)
  for (int64_t p = 0; p < points; ++p) {
    const int64_t oy = p / g.out_w;
    const int64_t ox = p % g.out_w;
    float* out = y + p * g.filters;
    for (int64_t f = 0; f < g.filters; ++f) out[f] = conv_point(g, w, x, oy, ox, f) + b[f];
  }
}

}  // namespace edgepart::kernels
