#include "vfactor/app/commands.hpp"

int main(int argc, char** argv) { return vfactor::app::run_cli(argc, argv); }
