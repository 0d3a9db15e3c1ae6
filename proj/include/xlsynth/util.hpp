#pragma once

// File, hashing, seeding and concurrency helpers shared by pipeline stages.

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "xlsynth/serialize.hpp"

namespace xlsynth {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path);
// Writes through a temporary sibling and renames, creating parent dirs.
void write_text_file(const fs::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);
std::string file_sha256(const fs::path& path);

// One JSON value per non-empty line.
std::vector<Json> read_jsonl(const fs::path& path);
std::string to_jsonl(const std::vector<Json>& rows);

std::string iso8601_now();

// Independent stream seed for a (base seed, index, tag) triple.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::string_view tag);
// Unbiased draw in [0, n); stable across standard libraries.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

// Runs fn(i) for i in [0, n) on up to `workers` threads and returns the
// results in index order. The first exception stops new work and is
// rethrown once running tasks finish.
template <typename Fn>
auto parallel_map(std::size_t n, std::size_t workers, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using R = decltype(fn(std::size_t{}));
    std::vector<std::optional<R>> slots(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        while (!stop) {
            const std::size_t i = next++;
            if (i >= n) return;
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                stop = true;
            }
        }
    };
    const std::size_t count = std::max<std::size_t>(1, std::min(workers, n));
    if (count == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace xlsynth
