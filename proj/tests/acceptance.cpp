// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.
#include <cstdio>

int main() {
  std::puts("acceptance placeholder");
  return 1;
}
