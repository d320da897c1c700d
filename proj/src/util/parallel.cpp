#include "subdivnet/parallel.h"

#include <cstdlib>
#include <string>

namespace subdivnet {

int worker_count() {
  static const int count = [] {
    if (const char* env = std::getenv("SUBDIVNET_THREADS")) {
      try {
        const int n = std::stoi(env);
        if (n > 0) return n;
      } catch (...) {
      }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return count;
}

}  // namespace subdivnet
