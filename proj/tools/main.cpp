#include "fairrank_cli.hpp"

int main(int argc, char** argv) { return fairrank::cli::run(argc, argv); }
