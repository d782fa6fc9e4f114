#include "sdci/cli.hpp"

int main(int argc, char** argv) { return sdci::run_cli(argc, argv); }
