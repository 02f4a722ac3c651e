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

#ifndef EDGEPART_KERNELS_HPP
#define EDGEPART_KERNELS_HPP

#include <cstdint>

namespace edgepart::kernels {

// Dense rows: y[r] = (sum_j w[r*in + j] * x[j]) + b[r], j ascending.
void fc_serial(const float* w, const float* b, const float* x, int64_t in, int64_t rows, float* y);
void fc_parallel(const float* w, const float* b, const float* x, int64_t in, int64_t rows, float* y);

struct ConvGeometry {
  int64_t in_h, in_w, in_c;
  int64_t kernel_h, kernel_w;
  int64_t stride;
  int64_t pad_top, pad_left;
  int64_t out_h, out_w;
  int64_t filters;
};

// Input HWC, weights F x kh x kw x C, output HWF. Per output the sum runs
// over (ky, kx, c) ascending, padded taps skipped, bias added last.
void conv_serial(const ConvGeometry& g, const float* w, const float* b, const float* x, float* y);
void conv_parallel(const ConvGeometry& g, const float* w, const float* b, const float* x, float* y);

}  // namespace edgepart::kernels

#endif  // EDGEPART_KERNELS_HPP
