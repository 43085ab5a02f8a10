#include "cli.hpp"

int main(int argc, char **argv) { return claimeval::cli::run_cli(argc, argv); }
