#include <plasmid_spectra/cli.hpp>

int main(int argc, char** argv) { return plasmid::cli::run(argc, argv); }
