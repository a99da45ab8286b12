#include "pardec/cli.hpp"

#include <iostream>

int main(int argc, char ** argv) {
    return pardec::run_cli(argc, argv, std::cout, std::cerr);
}
