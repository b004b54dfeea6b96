#include "recbench/cli.hpp"

int main(int argc, char** argv) { return recbench::cli::main(argc, argv); }
