#include "cli_app.hpp"

int main(int argc, char** argv) { return geolens::cli::run_cli(argc, argv); }
