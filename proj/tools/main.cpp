#include "cli/cli.hpp"

int main(int argc, char** argv) { return tokdiff::cli::run(argc, argv); }
