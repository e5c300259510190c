#include "moody/cli.hpp"

int main(int argc, char** argv) { return moody::cli::run(argc, argv); }
