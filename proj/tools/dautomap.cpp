#include "dautomap/cli.hpp"

int main(int argc, char** argv) { return dautomap::cli::run(argc, argv); }
