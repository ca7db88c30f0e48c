#include "abbl/cli.hpp"

int main(int argc, char** argv)
{
    return abbl::cli::run(argc, argv);
}
