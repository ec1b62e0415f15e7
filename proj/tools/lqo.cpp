#include <string>
#include <vector>

#include "lqo/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lqo::dispatch(std::move(args));
}
