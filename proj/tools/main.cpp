#include <string>
#include <vector>

#include "dmilo/harness.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ilo::cli_main(args);
}
