#include "cli_app.hpp"

int main(int argc, char** argv) { return disom::cli::run_cli(argc, argv); }
