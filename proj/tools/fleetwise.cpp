#include "fleetwise/cli.hpp"

int main(int argc, char** argv) { return fleetwise::cli::run(argc, argv); }
