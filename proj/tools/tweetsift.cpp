#include <iostream>

#include "tweetsift/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return tweetsift::dispatch(args, std::cout, std::cerr);
}
