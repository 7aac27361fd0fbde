#include "cli.hpp"

int main(int argc, char** argv) { return lida::cli::run(argc, argv); }
