#include "hawkesmix/cli.hpp"

int main(int argc, char** argv) { return hawkesmix::cli::main(argc, argv); }
