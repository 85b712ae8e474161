#include "ulrsim/harness.hpp"

int main(int argc, char** argv) { return ulr::run_cli(argc, argv); }
