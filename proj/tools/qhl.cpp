#include "qhl/harness.hpp"

int main(int argc, char** argv) { return qhl::cli_main(argc, argv); }
