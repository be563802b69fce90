#include "cellipse/cli.hpp"

int main(int argc, char** argv) { return cellipse::cli_main(argc, argv); }
