#include "ctxsp/cli.hpp"

int main(int argc, char** argv) { return ctxsp::cli::run(argc, argv); }
