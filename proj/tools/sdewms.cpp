#include <sdewms/cli.hpp>

int main(int argc, char** argv) { return sdewms::cli::run_cli(argc, argv); }
