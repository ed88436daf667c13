#include <string>
#include <vector>

#include <lpvcert/cli.hpp>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lpvcert::run_command(std::move(args));
}
