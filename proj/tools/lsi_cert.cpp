#include "lsi/cli/runner.hpp"

int main(int argc, char** argv) { return lsi::cli::main(argc, argv); }
