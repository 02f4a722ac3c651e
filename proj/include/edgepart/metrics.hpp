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

#ifndef EDGEPART_METRICS_HPP
#define EDGEPART_METRICS_HPP

#include <cstdint>
#include <vector>

namespace edgepart {

struct LatencyBreakdown {
  double compute = 0.0;
  double comm = 0.0;
  double reload = 0.0;
};

struct RunMetrics {
  double ips = 0.0;
  double t_forward_seconds = 0.0;
  // Mean per inference along the critical path.
  LatencyBreakdown breakdown;
  std::vector<double> per_device_busy_seconds;
  double wall_seconds = 0.0;
  int64_t outputs = 0;
  int64_t drops = 0;
  double setup_seconds = 0.0;
};

}  // namespace edgepart

#endif  // EDGEPART_METRICS_HPP
