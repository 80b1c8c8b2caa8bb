#include <string>
#include <vector>

#include "nirprompt/cli_commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return nirprompt::cli::run(args);
}
