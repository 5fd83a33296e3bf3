#include "cli.hpp"

int main(int argc, char** argv) { return profpipe::cli::run_cli({argv, argv + argc}); }
