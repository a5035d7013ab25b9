#include "cli_app.hpp"

int main(int argc, char** argv) { return fpr::cli_dispatch(argc, argv); }
