#include <malloc.h>

#include "shapeinv/cli.hpp"

int main(int argc, char** argv) {
  // Training and inversion reuse large buffers every step; keeping them in
  // the heap instead of fresh mmaps avoids repeated page faults.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return shapeinv::cli::run(argc, argv);
}
