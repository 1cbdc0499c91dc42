#include "mvest/cli.hpp"

int main(int argc, char** argv) { return mvest::cli::run(argc, argv); }
