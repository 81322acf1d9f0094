#include <string>
#include <vector>

#include "qmelt/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return qmelt::cli::dispatch(args);
}
