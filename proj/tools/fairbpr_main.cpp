#include "fairbpr/cli.hpp"

int main(int argc, char** argv) { return fairbpr::cli::run(argc, argv); }
