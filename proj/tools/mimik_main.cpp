#include "mimik/cli.hpp"

int main(int argc, char** argv) { return mimik::run_cli(argc, argv); }
