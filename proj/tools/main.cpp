#include "liouconv/cli.hpp"

int main(int argc, char** argv)
{
    return liouconv::cli::run_main(argc, argv);
}
