#include "multistop/cli.hpp"

int main(int argc, char** argv) { return multistop::cli::run(argc, argv); }
