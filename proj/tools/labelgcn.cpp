#include <iostream>
#include <string>
#include <vector>

#include "labelgcn/cli.hpp"

int main(int argc, char** argv) {
    return labelgcn::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
