#include "chaoseval/cli.hpp"

int main(int argc, char** argv) { return chaoseval::cli::run(argc, argv); }
