#include "hoekf/cli.hpp"

int main(int argc, char** argv) { return hoekf::run_cli(argc, argv); }
