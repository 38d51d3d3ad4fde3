#include "spnodal/app.hpp"

int main(int argc, char** argv) { return spnodal::run_cli(argc, argv); }
