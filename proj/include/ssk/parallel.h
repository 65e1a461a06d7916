// ssk/parallel.h

// Copyright 2026  ssk authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SSK_PARALLEL_H_
#define SSK_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace ssk {

/// Worker count: hardware concurrency, capped by the SSK_THREADS environment
/// variable when it is set to a positive integer.
int worker_count();

/// Runs fn(i) for i in [0, n). Items must write disjoint outputs; results are
/// then independent of the thread schedule. Exceptions from workers are
/// rethrown on the calling thread (the one from the lowest index wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ssk

#endif  // SSK_PARALLEL_H_
