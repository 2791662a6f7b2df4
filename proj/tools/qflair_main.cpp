#include "qflair/cli.hpp"

int main(int argc, char** argv) { return qflair::cli::run(argc, argv); }
