#include "chatty/cli.hpp"

int main(int argc, char** argv) {
    return chatty::run_cli({argv + 1, argv + argc});
}
