#include "dautomap/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace dautomap {

namespace {

int threads_from_env() {
    const char* env = std::getenv("DAUTOMAP_NUM_THREADS");
    if (env == nullptr) return 1;
    try {
        return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
        return 1;
    }
}

std::atomic<int>& thread_setting() {
    static std::atomic<int> value{threads_from_env()};
    return value;
}

}  // namespace

int num_threads() { return thread_setting().load(); }

void set_num_threads(int n) { thread_setting().store(std::max(1, n)); }

}  // namespace dautomap
