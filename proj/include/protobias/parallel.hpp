#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace protobias {

// Bounded-parallel map with in-order commit: `work(i)` runs on up to `width`
// worker threads, `commit(i, result)` runs on the calling thread strictly in
// index order. The single committing thread is the manifest writer, so output
// order never depends on scheduling. The first exception (from work or commit)
// stops dispatch and is rethrown after the workers drain.
template <class Result, class Work, class Commit>
void ordered_parallel_map(std::size_t count, std::size_t width, Work work, Commit commit) {
    if (count == 0) {
        return;
    }
    width = std::clamp<std::size_t>(width, 1, count);
    if (width == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            commit(i, work(i));
        }
        return;
    }

    std::vector<std::optional<Result>> results(count);
    std::vector<std::exception_ptr> errors(count);
    std::vector<char> done(count, 0);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex mutex;
    std::condition_variable ready;

    auto worker = [&] {
        while (!stop.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) {
                break;
            }
            std::optional<Result> value;
            std::exception_ptr error;
            try {
                value.emplace(work(i));
            } catch (...) {
                error = std::current_exception();
            }
            {
                std::lock_guard lock(mutex);
                results[i] = std::move(value);
                errors[i] = error;
                done[i] = 1;
            }
            ready.notify_all();
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(width);
    for (std::size_t t = 0; t < width; ++t) {
        threads.emplace_back(worker);
    }

    std::exception_ptr failure;
    for (std::size_t i = 0; i < count && !failure; ++i) {
        std::optional<Result> value;
        {
            std::unique_lock lock(mutex);
            ready.wait(lock, [&] { return done[i] != 0; });
            if (errors[i]) {
                failure = errors[i];
                break;
            }
            value = std::move(results[i]);
            results[i].reset();
        }
        try {
            commit(i, std::move(*value));
        } catch (...) {
            failure = std::current_exception();
        }
    }
    stop.store(true);
    for (auto &t : threads) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace protobias
