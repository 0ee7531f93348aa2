#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace icrlab {

// Runs body(i) for i in [0, n) on up to `workers` threads. Work is assigned statically
// (i % workers) and each index writes only its own outputs, so results never depend on
// the worker count. If any body throws, the exception from the lowest index is rethrown.
template <typename Body>
void parallel_for(int n, int workers, Body&& body)
{
    workers = std::clamp(workers, 1, std::max(1, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }

    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    {
        std::vector<std::jthread> threads;
        threads.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                for (int i = w; i < n; i += workers) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[static_cast<std::size_t>(i)] = std::current_exception();
                    }
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace icrlab
