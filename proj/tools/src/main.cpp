#include "seqbreak_app/app.hpp"

#include <iostream>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return seqbreak::app::run(args, std::cout, std::cerr);
}
