#include "golfsig/cli/cli.hpp"

int main(int argc, char** argv) { return golfsig::cli::run(argc, argv); }
