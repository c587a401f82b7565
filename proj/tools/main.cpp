#include <iostream>

#include "ecgbeatnet/cli.hpp"

int main(int argc, char **argv) {
    return ecg::cli::run_cli(argc, argv, std::cout, std::cerr);
}
