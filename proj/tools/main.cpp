#include "mgsgan/cli.hpp"

int main(int argc, char** argv) { return mgsgan::cli::main(argc, argv); }
