#include "gvdoc/cli.hpp"

int main(int argc, char** argv) { return gvdoc::run_cli(argc, argv); }
