#include "pulsekit/cli.hpp"

int main(int argc, char** argv) { return pulsekit::cli::run(argc, argv); }
