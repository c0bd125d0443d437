#include "fsnc/cli.hpp"

int main(int argc, char** argv) { return fsnc::run_cli(argc, argv); }
