#include "gblab/runner.hpp"

int main(int argc, char** argv) { return gblab::cli::run_cli(argc, argv); }
