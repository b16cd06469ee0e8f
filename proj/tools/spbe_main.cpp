#include "spbe/cli.hpp"

int main(int argc, char** argv) { return spbe::cli::main(argc, argv); }
