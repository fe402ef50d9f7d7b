#include "garag/cli.hpp"

int main(int argc, char** argv) { return garag::cli::run(argc, argv); }
