#include "surftv/cli.hpp"

int main(int argc, char** argv) { return surftv::cli::run(argc, argv); }
