#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace hsdla {

/// Per-kernel accumulated real-flop counts. One complex multiply-add is
/// counted as 8 real flops.
class FlopLedger {
 public:
  void add(const std::string& kernel, std::uint64_t flops) {
    counts_[kernel] += flops;
    total_ += flops;
  }

  std::uint64_t total() const { return total_; }

  std::uint64_t count(const std::string& kernel) const {
    auto it = counts_.find(kernel);
    return it == counts_.end() ? 0 : it->second;
  }

  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }

  bool operator==(const FlopLedger& other) const {
    return total_ == other.total_ && counts_ == other.counts_;
  }

 private:
  std::map<std::string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

}  // namespace hsdla
