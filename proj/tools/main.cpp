#include "commands.hpp"

int main(int argc, char** argv) { return regimix::cli::run(argc, argv); }
