#include "nbrescore/cli/commands.hpp"

int main(int argc, char** argv) { return nbrescore::cli::run_cli(argc, argv); }
