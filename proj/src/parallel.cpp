#include "digitfrac/parallel.hpp"

#include <cstdlib>
#include <string>

namespace digitfrac {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DIGITFRAC_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

}  // namespace digitfrac
