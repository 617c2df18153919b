#include <iostream>
#include <string>
#include <vector>

#include "zsl/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return zsl::dispatch(args, std::cout, std::cerr);
}
