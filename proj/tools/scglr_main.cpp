#include "scglr/cli.hpp"

int main(int argc, char** argv) { return scglr::run_cli(argc, argv); }
