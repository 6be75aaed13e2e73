#include "singlimit/cli.hpp"

int main(int argc, char** argv) { return singlimit::cli::run(argc, argv); }
