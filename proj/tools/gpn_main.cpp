#include "gpn/cli.hpp"

int main(int argc, char** argv) { return gpn::cli::run(argc, argv); }
