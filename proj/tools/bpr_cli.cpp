#include <string>
#include <vector>

#include "bpr/cli.hpp"
#include "bpr/runtime.hpp"

int main(int argc, char** argv) {
  bpr::tune_allocator();
  return bpr::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
