// SPDX-License-Identifier: Apache-2.0
#include "smmo/executor.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace smmo {

namespace exec {

namespace {

// Below this, thread spawn costs more than the scan itself.
constexpr std::size_t kParallelCutoff = std::size_t{1} << 15;

struct ChunkRange {
    std::size_t lo, hi;
};

std::vector<ChunkRange> split_even(std::size_t n, unsigned parts) {
    std::vector<ChunkRange> out;
    const std::size_t chunk = (n + parts - 1) / parts;
    for (std::size_t lo = 0; lo < n; lo += chunk) {
        out.push_back({lo, std::min(n, lo + chunk)});
    }
    return out;
}

void run_chunks(const std::vector<ChunkRange>& chunks,
                const std::function<void(std::size_t, const ChunkRange&)>& body) {
    std::vector<std::thread> pool;
    pool.reserve(chunks.size());
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        pool.emplace_back([&, c] { body(c, chunks[c]); });
    }
    for (std::thread& t : pool) {
        t.join();
    }
}

}  // namespace

std::vector<std::uint32_t> enumerate_indices(const BlockBitmap& bitmap, std::size_t num_bits) {
    std::vector<std::uint32_t> out(num_bits, kNoIndex);
    for (std::size_t c = 0; c * 64 < num_bits; ++c) {
        std::uint64_t w = bitmap.level_word(0, c);
        while (w != 0) {
            const std::size_t i = c * 64 + std::size_t(std::countr_zero(w));
            w &= w - 1;
            out[i] = std::uint32_t(i);
        }
    }
    return out;
}

std::vector<std::size_t> exclusive_prefix_sum(std::span<const std::uint8_t> flags,
                                              unsigned workers) {
    const std::size_t n = flags.size();
    std::vector<std::size_t> out(n);
    if (n == 0) {
        return out;
    }
    if (workers <= 1 || n < kParallelCutoff) {
        std::size_t acc = 0;
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = acc;
            acc += flags[i];
        }
        return out;
    }

    const auto chunks = split_even(n, workers);
    std::vector<std::size_t> sums(chunks.size());
    run_chunks(chunks, [&](std::size_t c, const ChunkRange& r) {
        std::size_t acc = 0;
        for (std::size_t i = r.lo; i < r.hi; ++i) {
            acc += flags[i];
        }
        sums[c] = acc;
    });

    std::size_t acc = 0;
    for (std::size_t& s : sums) {
        const std::size_t v = s;
        s = acc;
        acc += v;
    }

    run_chunks(chunks, [&](std::size_t c, const ChunkRange& r) {
        std::size_t local = sums[c];
        for (std::size_t i = r.lo; i < r.hi; ++i) {
            out[i] = local;
            local += flags[i];
        }
    });
    return out;
}

std::vector<std::uint32_t> compact(std::span<const std::uint32_t> sparse, unsigned workers) {
    const std::size_t n = sparse.size();
    if (n == 0) {
        return {};
    }
    std::vector<std::uint8_t> flags(n);
    for (std::size_t i = 0; i < n; ++i) {
        flags[i] = sparse[i] != kNoIndex;
    }
    const std::vector<std::size_t> offsets = exclusive_prefix_sum(flags, workers);
    std::vector<std::uint32_t> out(offsets.back() + flags.back());

    if (workers <= 1 || n < kParallelCutoff) {
        for (std::size_t i = 0; i < n; ++i) {
            if (flags[i]) {
                out[offsets[i]] = sparse[i];
            }
        }
        return out;
    }
    run_chunks(split_even(n, workers), [&](std::size_t, const ChunkRange& r) {
        for (std::size_t i = r.lo; i < r.hi; ++i) {
            if (flags[i]) {
                out[offsets[i]] = sparse[i];
            }
        }
    });
    return out;
}

}  // namespace exec

Executor::Executor(unsigned workers) : workers_(workers) {
    if (workers_ == 0) {
        workers_ = std::max(1u, std::thread::hardware_concurrency());
    }
}

exec::DoAllPlan Executor::make_plan(const BlockBitmap& allocated, std::size_t num_blocks,
                                    std::uint32_t capacity) const {
    exec::DoAllPlan plan;
    plan.capacity = capacity;
    const auto sparse = exec::enumerate_indices(allocated, num_blocks);
    plan.blocks = exec::compact(sparse, workers_);
    return plan;
}

exec::DoAllReport Executor::run_plan(const exec::DoAllPlan& plan, const WordLoader& load_word,
                                     const SlotVisitor& visit) const {
    exec::DoAllReport report;
    report.logical_threads = plan.logical_threads();
    const std::size_t total = report.logical_threads;
    if (total == 0) {
        return report;  // nothing to do, no worker dispatch
    }

    const std::uint32_t c = plan.capacity;
    std::atomic<std::size_t> visited{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker_body = [&](std::size_t lo, std::size_t hi) {
        std::size_t local_visited = 0;
        std::size_t current_block = ~std::size_t{0};
        std::uint64_t word = 0;
        try {
            for (std::size_t tid = lo; tid < hi; ++tid) {
                const std::size_t bi = tid / c;
                if (bi != current_block) {
                    if (failed.load(std::memory_order_relaxed)) {
                        break;
                    }
                    current_block = bi;
                    word = load_word(plan.blocks[bi]);  // one snapshot per block
                }
                const std::uint32_t slot = std::uint32_t(tid % c);
                if ((word >> slot) & 1) {
                    visit(plan.blocks[bi], slot);
                    ++local_visited;
                }
            }
        } catch (...) {
            failed.store(true, std::memory_order_relaxed);
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) {
                first_error = std::current_exception();
            }
        }
        visited.fetch_add(local_visited, std::memory_order_relaxed);
    };

    if (workers_ == 1) {
        worker_body(0, total);
    } else {
        const std::size_t chunk = (total + workers_ - 1) / workers_;
        std::vector<std::thread> pool;
        for (std::size_t lo = 0; lo < total; lo += chunk) {
            pool.emplace_back(worker_body, lo, std::min(total, lo + chunk));
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    if (first_error) {
        std::rethrow_exception(first_error);
    }
    report.visited = visited.load(std::memory_order_relaxed);
    return report;
}

exec::DoAllReport Executor::do_all(const BlockBitmap& allocated, std::size_t num_blocks,
                                   std::uint32_t capacity, const WordLoader& load_word,
                                   const SlotVisitor& visit) const {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    const exec::DoAllPlan plan = make_plan(allocated, num_blocks, capacity);
    const auto t1 = Clock::now();
    exec::DoAllReport report = run_plan(plan, load_word, visit);
    const auto t2 = Clock::now();
    report.plan_time = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0);
    report.exec_time = std::chrono::duration_cast<std::chrono::nanoseconds>(t2 - t1);
    return report;
}

}  // namespace smmo
