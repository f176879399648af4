// Copyright 2026 The pivotdt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PIVOTDT_PARALLEL_HPP_
#define PIVOTDT_PARALLEL_HPP_

#include <functional>

namespace pivotdt {

// requested > 0 wins; otherwise PIVOT_DT_WORKERS, otherwise the core count.
int resolve_workers(int requested = 0);

// Calls fn(i) for i in [0, count) on up to `workers` threads. Callers write
// results into slot i, so output never depends on scheduling. If any call
// throws, the exception from the lowest index is rethrown.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

}  // namespace pivotdt

#endif  // PIVOTDT_PARALLEL_HPP_
