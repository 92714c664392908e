/*
 * Copyright 2026 The OILMM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <exception>
#include <vector>

namespace oilmm {

/// How independent per-latent (or per-coordinate) work is scheduled.
/// `Serial` is the reference path; `Parallel` uses OpenMP when available.
/// Both produce bit-identical results: every task writes its own slot and
/// reductions happen afterwards in index order.
enum class Execution { Serial, Parallel };

int max_threads();

/// Runs fn(i) for i in [0, count). Exceptions thrown by tasks are captured
/// and the one from the lowest index is rethrown after all tasks finish.
template <class Fn>
void parallel_for(long count, Execution exec, Fn&& fn) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    const bool par = exec == Execution::Parallel && count > 1;
#pragma omp parallel for schedule(dynamic, 1) if (par)
    for (long i = 0; i < count; ++i) {
        try {
            fn(i);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace oilmm
