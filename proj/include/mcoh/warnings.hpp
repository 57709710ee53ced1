#pragma once

#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace mcoh {

// Collector for non-fatal diagnostics (dropped tickers, degenerate windows,
// graph repairs). Kept apart from data artifacts; thread-safe so parallel
// window workers can share one log.
class WarningLog {
 public:
  void add(std::string msg) {
    std::lock_guard<std::mutex> lock(mu_);
    messages_.push_back(std::move(msg));
  }

  std::vector<std::string> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return messages_;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return messages_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> messages_;
};

}  // namespace mcoh
