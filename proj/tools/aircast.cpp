#include "aircast/cli.hpp"

int main(int argc, char** argv) { return aircast::cli::run(argc, argv); }
