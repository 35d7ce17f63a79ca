#include "msdi/cli.hpp"

int main(int argc, char** argv) { return msdi::run_cli(argc, argv); }
