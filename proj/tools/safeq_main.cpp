#include "safeq/harness.hpp"

int main(int argc, char** argv) { return safeq::run_cli(argc, argv); }
