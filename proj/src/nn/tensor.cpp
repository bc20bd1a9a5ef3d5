#include "racklay/nn/tensor.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif
#include "racklay/nn/graph.hpp"

#include <sstream>

namespace racklay::nn {

void flush_denormals() {
#if defined(__SSE__)
  _mm_setcsr(_mm_getcsr() | 0x8040);
#endif
}

std::size_t shape_numel(const Shape& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d < 0) throw ShapeError("negative dimension in " + shape_string(dims));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? ", " : "") << dims[i];
  os << ']';
  return os.str();
}

}  // namespace racklay::nn
