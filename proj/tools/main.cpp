#include "hazardsieve/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return hazardsieve::run_cli(argc, argv, std::cout, std::cerr);
}
