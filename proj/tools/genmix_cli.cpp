#include "genmix/cli.hpp"

int main(int argc, char** argv) { return genmix::cli::main(argc, argv); }
