#include <iostream>
#include <string>

#include "dapt/fixtures.hpp"

// Regenerates the bundled synthetic fixtures (they are deterministic, so the
// output is byte-identical on every run).
int main(int argc, char** argv) {
  std::string dir = argc > 1 ? argv[1] : "data/fixtures";
  dapt::fixtures::write_all(dir);
  std::cout << "fixtures written to " << dir << "\n";
  return 0;
}
