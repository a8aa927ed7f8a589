#include "signflow/cli.hpp"

int main(int argc, char** argv) { return signflow::cli::run(argc, argv); }
