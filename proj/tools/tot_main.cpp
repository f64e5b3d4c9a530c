#include "tot/cli.hpp"

int main(int argc, char** argv) { return tot::run_cli(argc, argv); }
