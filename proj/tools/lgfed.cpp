#include "lgfed/cli/commands.hpp"

int main(int argc, char** argv) { return lgfed::cli::run_cli(argc, argv); }
