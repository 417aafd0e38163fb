#include "commands.hpp"

int main(int argc, char** argv) { return riccati_geo::cli::main_entry(argc, argv); }
