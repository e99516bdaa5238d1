#include "lmshoot/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lmshoot {

unsigned hardware_threads()
{
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1u : n;
}

namespace {

// Persistent worker pool. Work arrives as a batch of chunk indices; workers
// and the submitting thread drain a shared atomic counter, so a chunk runs on
// whichever thread grabs it (chunk contents are fixed up front, so placement
// does not affect results).
class Pool {
 public:
  static Pool& instance()
  {
    static Pool pool;
    return pool;
  }

  void run(unsigned n_chunks, const std::function<void(unsigned)>& chunk)
  {
    if (n_chunks == 0) return;
    if (n_chunks == 1 || workers_.empty()) {
      for (unsigned c = 0; c < n_chunks; ++c) chunk(c);
      return;
    }

    {
      std::unique_lock<std::mutex> lock(mutex_);
      task_ = &chunk;
      next_ = 0;
      pending_ = n_chunks;
      total_ = n_chunks;
      error_ = nullptr;
      ++generation_;
    }
    wake_.notify_all();

    drain(chunk);

    std::unique_lock<std::mutex> lock(mutex_);
    done_.wait(lock, [&] { return pending_ == 0; });
    task_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

  ~Pool()
  {
    {
      std::unique_lock<std::mutex> lock(mutex_);
      stop_ = true;
      ++generation_;
    }
    wake_.notify_all();
    for (auto& w : workers_) w.join();
  }

 private:
  Pool()
  {
    unsigned n = hardware_threads();
    for (unsigned i = 1; i < n; ++i)
      workers_.emplace_back([this] { worker_loop(); });
  }

  void drain(const std::function<void(unsigned)>& chunk)
  {
    for (;;) {
      unsigned c = next_.fetch_add(1);
      if (c >= total_) break;
      run_one(chunk, c);
    }
  }

  void run_one(const std::function<void(unsigned)>& chunk, unsigned c)
  {
    try {
      chunk(c);
    } catch (...) {
      std::unique_lock<std::mutex> lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
    std::unique_lock<std::mutex> lock(mutex_);
    if (--pending_ == 0) done_.notify_all();
  }

  void worker_loop()
  {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(unsigned)>* task = nullptr;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        task = task_;
      }
      if (!task) continue;
      for (;;) {
        unsigned c = next_.fetch_add(1);
        if (c >= total_) break;
        run_one(*task, c);
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_, done_;
  const std::function<void(unsigned)>* task_ = nullptr;
  std::atomic<unsigned> next_{0};
  unsigned total_ = 0;
  unsigned pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body)
{
  if (n == 0) return;
  std::size_t want = threads == 0 ? hardware_threads() : threads;
  std::size_t chunks = std::min<std::size_t>(want, n);
  if (chunks <= 1) {
    body(0, n);
    return;
  }
  auto chunk_body = [&](unsigned c) {
    std::size_t begin = n * c / chunks;
    std::size_t end = n * (c + 1) / chunks;
    if (begin < end) body(begin, end);
  };
  Pool::instance().run(static_cast<unsigned>(chunks), chunk_body);
}

}  // namespace lmshoot
