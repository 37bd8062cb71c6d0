#include "metamdp/cli.hpp"

int main(int argc, char** argv) { return metamdp::run_cli(argc, argv); }
