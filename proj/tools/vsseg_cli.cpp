#include <vector>

#include "vsseg/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return vsseg::cli::run(std::move(args));
}
