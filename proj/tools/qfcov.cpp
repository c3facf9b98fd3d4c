#include "qfcov/cli.hpp"

int main(int argc, char** argv) { return qfcov::cli_main(argc, argv); }
