#include "fedgen/config.hpp"

int main(int argc, char** argv) { return fedgen::run_cli(argc, argv); }
